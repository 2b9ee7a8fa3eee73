import logging
import re

import pulp

from exceptions import HorizonError, InfeasibleActionError, ModelError
from oracle.brute_force import OfflineSolution, SolutionEntry

VARIABLE_PATTERN = re.compile(r"^[xzwy](_\d+)+$")


def min_horizon(trace):
    if not len(trace):
        return 1
    return max(vm.arrival for vm in trace) + sum(vm.lifetime for vm in trace)


def build_milp(trace, config, horizon, strict_order=False):
    """
    Time-indexed model of the offline allocation problem.

    Variables:
        z_j_t   start indicator of request j at tick t (binary)
        x_k_i_j request j uses NUMA node i of PM k (binary)
        y_k_i_j_t request j is active on node (k, i) at tick t (linearized product)
        w_j     wait of request j

    Args:
        trace (WorkloadTrace): Instance.
        config (ClusterConfig): Cluster block.
        horizon (int): Number of ticks modeled; every request must finish inside it.
        strict_order (bool): Strictly increasing start ticks instead of non-decreasing.

    Returns:
        pulp.LpProblem: The model.
    """
    needed = min_horizon(trace)
    if horizon < needed:
        raise HorizonError(f"Horizon {horizon} is shorter than max arrival plus total lifetime ({needed})")
    requests = list(trace)
    ticks = range(horizon)
    pms = range(config.m)
    prob = pulp.LpProblem("dvamp_offline", pulp.LpMinimize)

    z = {(j, t): pulp.LpVariable(f"z_{j}_{t}", cat=pulp.LpBinary) for j in range(len(requests)) for t in ticks}
    x = {(k, i, j): pulp.LpVariable(f"x_{k}_{i}_{j}", cat=pulp.LpBinary)
         for k in pms for i in (0, 1) for j in range(len(requests))}
    w = {j: pulp.LpVariable(f"w_{j}", lowBound=0) for j in range(len(requests))}

    prob += pulp.lpSum(w.values()), "total_wait"

    starts = {}
    for j, vm in enumerate(requests):
        prob += pulp.lpSum(z[j, t] for t in ticks) == 1, f"start_once_{j}"
        # starts are confined to [arrival, horizon - lifetime]
        window = [t for t in ticks if t < vm.arrival or t > horizon - vm.lifetime]
        if window:
            prob += pulp.lpSum(z[j, t] for t in window) == 0, f"start_window_{j}"
        starts[j] = pulp.lpSum(t * z[j, t] for t in ticks)
        prob += w[j] == starts[j] - vm.arrival, f"wait_{j}"
        prob += pulp.lpSum(x[k, i, j] for k in pms for i in (0, 1)) == 1 + vm.div, f"numa_count_{j}"
        if vm.div:
            for k in pms:
                prob += x[k, 0, j] == x[k, 1, j], f"split_link_{j}_{k}"
        if j:
            gap = 1 if strict_order else 0
            prob += starts[j] >= starts[j - 1] + gap, f"order_{j}"

    y = {}
    for j, vm in enumerate(requests):
        for t in ticks:
            active = pulp.lpSum(z[j, s] for s in range(max(0, t - vm.lifetime + 1), t + 1))
            for k in pms:
                for i in (0, 1):
                    var = y[k, i, j, t] = pulp.LpVariable(f"y_{k}_{i}_{j}_{t}", lowBound=0, upBound=1)
                    prob += var >= active + x[k, i, j] - 1, f"active_{k}_{i}_{j}_{t}"

    for k in pms:
        for i in (0, 1):
            for d in range(config.dim):
                for t in ticks:
                    terms = [vm.gamma * vm.resources[d] * y[k, i, j, t]
                             for j, vm in enumerate(requests) if vm.resources[d]]
                    if terms:
                        prob += pulp.lpSum(terms) <= config.capacities[d], f"capacity_{k}_{i}_{d}_{t}"
    logging.info(f"MILP with {len(prob.variables())} variables and {len(prob.constraints)} rows "
                 f"(n={len(requests)}, m={config.m}, horizon={horizon})")
    return prob


def export_milp(trace, config, horizon, path, strict_order=False, header=None):
    """
    Write the time-indexed model in LP format.

    Args:
        trace (WorkloadTrace): Instance.
        config (ClusterConfig): Cluster block.
        horizon (int): Modeled ticks.
        path (str): Destination .lp file.
        strict_order (bool): Strictly increasing start ticks.
        header (str): Optional text written as a leading LP comment.

    Returns:
        pulp.LpProblem: The exported model.
    """
    prob = build_milp(trace, config, horizon, strict_order)
    try:
        prob.writeLP(path)
        if header:
            with open(path, 'r', encoding='utf-8') as file:
                text = file.read()
            with open(path, 'w', encoding='utf-8') as file:
                file.write(f"\\* {header} *\\\n{text}")
        logging.info(f"MILP written to {path}")
    except OSError as e:
        logging.error(f"Error writing MILP {path}: {e}")
        raise
    return prob


def solve_milp(prob, time_limit=None):
    """
    Solve a model with PuLP's bundled CBC.

    Returns:
        dict: Variable name to value.
    """
    solver = pulp.PULP_CBC_CMD(msg=False, timeLimit=time_limit)
    if not solver.available():
        raise ModelError("CBC solver is not available")
    status = prob.solve(solver)
    if pulp.LpStatus[status] != "Optimal":
        raise ModelError(f"MILP solve ended with status {pulp.LpStatus[status]}")
    return {v.name: v.varValue for v in prob.variables()}


def parse_solution_values(text):
    """
    Read variable/value pairs from external solver output.

    Accepts `name value`, `name = value` and CBC's `index name value reduced_cost` rows;
    lines without a model variable are skipped.

    Args:
        text (str): Solver output.

    Returns:
        dict: Variable name to value.
    """
    values = {}
    for line in text.splitlines():
        tokens = line.replace("=", " ").split()
        for pos, token in enumerate(tokens[:-1]):
            if VARIABLE_PATTERN.match(token):
                try:
                    values[token] = float(tokens[pos + 1])
                except ValueError:
                    pass
                break
    return values


def solution_from_values(trace, config, values, strict_order=False):
    """
    Turn solver variable values into an OfflineSolution.

    Args:
        trace (WorkloadTrace): Instance the model was built from.
        config (ClusterConfig): Cluster block.
        values (dict): Variable name to value; absent variables count as 0.
        strict_order (bool): Order mode the model was built with.

    Returns:
        OfflineSolution: Placements and start ticks.
    """
    starts, nodes = {}, {}
    for name, value in values.items():
        if value is None or value < 0.5:
            continue
        parts = name.split("_")
        if parts[0] == "z":
            j, t = int(parts[1]), int(parts[2])
            if j in starts:
                raise InfeasibleActionError(f"Request {j} has more than one start tick")
            starts[j] = t
        elif parts[0] == "x":
            k, i, j = int(parts[1]), int(parts[2]), int(parts[3])
            nodes.setdefault(j, []).append((k, i))
    entries = []
    for j, vm in enumerate(trace):
        if j not in starts or j not in nodes:
            raise InfeasibleActionError(f"Request {j} has no start tick or placement in the solution")
        pm_set = {k for k, _ in nodes[j]}
        if len(pm_set) != 1:
            raise InfeasibleActionError(f"Request {j} is spread over PMs {sorted(pm_set)}")
        entries.append(SolutionEntry(vm.id, pm_set.pop(), tuple(sorted(i for _, i in nodes[j])), starts[j]))
    total = sum(e.start - vm.arrival for e, vm in zip(entries, trace))
    return OfflineSolution(entries=tuple(entries), total_wait=int(total), strict_order=strict_order)
