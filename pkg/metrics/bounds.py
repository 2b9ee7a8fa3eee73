import logging
from dataclasses import dataclass

import pandas as pd
from tqdm import tqdm

from environment.episode_log import write_csv
from environment.simulator import run_episode
from exceptions import AdversaryError, OracleLimitError
from oracle.brute_force import brute_force_opt
from workload.episodes import EpisodeSpec
from workload.generator import gen_adversarial

SWEEP_COLUMNS = ["m", "q", "mu", "ON", "TR", "ratio", "limit"]
TR_TOLERANCE = 1e-9
ORACLE_N_LIMIT = 14
ORACLE_M_LIMIT = 3


def tr(trace):
    """
    Total time-resource: sum over requests and resources of r_d * lifetime.
    """
    return float(sum(sum(vm.resources) * vm.lifetime for vm in trace))


def gap_limit(m, mu):
    """
    Limit of (ON - OPT) / TR on the worst-case family as the granularity grows.
    """
    return (m - 1) / (2 * m - 1) * (mu - 1)


@dataclass(frozen=True)
class BoundReport:
    m: int
    q: int
    mu: int
    on: int
    opt: int
    tr: float
    ratio: float
    limit: float
    scheduler: str = None
    opt_verified: bool = False

    def row(self):
        return {"m": self.m, "q": self.q, "mu": self.mu, "ON": self.on, "TR": self.tr,
                "ratio": self.ratio, "limit": self.limit}


def bound_report(m, q, mu, scheduler, verify_opt=False, n_limit=ORACLE_N_LIMIT, m_limit=ORACLE_M_LIMIT):
    """
    Measure a scheduler's wait on the worst-case instance built against it.

    Args:
        m (int): PM count.
        q (int): Granularity of the t=0 batch.
        mu (int): Lifetime of the blocking VMs.
        scheduler (Scheduler): Greedy scheduler.
        verify_opt (bool): Confirm OPT with the exhaustive oracle where the
            instance fits n_limit and m_limit; larger instances keep OPT=0.
        n_limit (int): Largest request count handed to the oracle.
        m_limit (int): Largest PM count handed to the oracle.

    Returns:
        BoundReport: ON, OPT, TR and the normalized gap.
    """
    instance = gen_adversarial(m, q, mu, scheduler)
    result = run_episode(instance.trace, EpisodeSpec(0, len(instance.trace)), scheduler, instance.config)
    on = result.total_wait
    if on != instance.on_target:
        raise AdversaryError(f"{scheduler.name} waited {on} on m={m}, q={q}, mu={mu}; "
                             f"a greedy scheduler must wait {instance.on_target}")
    opt = instance.opt_target
    opt_verified = False
    if verify_opt:
        try:
            opt = brute_force_opt(instance.trace, instance.config, n_limit=n_limit, m_limit=m_limit).total_wait
            opt_verified = True
        except OracleLimitError as e:
            logging.info(f"Keeping OPT={opt} for m={m}, q={q}, mu={mu}: {e}")
        if opt != instance.opt_target:
            raise AdversaryError(f"Oracle found OPT={opt} on m={m}, q={q}, mu={mu}, "
                                 f"expected {instance.opt_target}")
    total = tr(instance.trace)
    if abs(total - instance.tr_target) > TR_TOLERANCE * max(1.0, total):
        raise AdversaryError(f"Measured TR {total} differs from the closed form {instance.tr_target}")
    return BoundReport(
        m=m, q=q, mu=mu, on=on, opt=opt, tr=total,
        ratio=(on - opt) / total,
        limit=gap_limit(m, mu),
        scheduler=scheduler.name,
        opt_verified=opt_verified,
    )


def bound_sweep(m_list, q_list, mu_list, scheduler, verify_opt=False, n_limit=ORACLE_N_LIMIT,
                m_limit=ORACLE_M_LIMIT):
    grid = [(m, q, mu) for m in m_list for q in q_list for mu in mu_list]
    quiet = logging.getLogger().getEffectiveLevel() > logging.INFO
    reports = [bound_report(m, q, mu, scheduler, verify_opt, n_limit, m_limit)
               for m, q, mu in tqdm(grid, desc="Bound sweep", disable=quiet)]
    verified = sum(report.opt_verified for report in reports)
    logging.info(f"Bound sweep over {len(grid)} instances with {scheduler.name}, OPT confirmed on {verified}")
    return reports


def sweep_frame(reports):
    rows = [{k: f"{round(v, 4):g}" for k, v in report.row().items()} for report in reports]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def write_bound_sweep(reports, path, header=None):
    write_csv(sweep_frame(reports), path, header)
    logging.info(f"Bound sweep with {len(reports)} rows written to {path}")
