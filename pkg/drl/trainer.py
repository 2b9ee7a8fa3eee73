import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import orjson
import pandas as pd
from tqdm import tqdm

from drl.evaluation import run_episodes
from drl.replay import NStepWindow, ReplayMemory, Transition
from environment.episode_log import write_csv
from environment.simulator import DvampEnv
from exceptions import ConfigurationError, TrainingDivergedError
from qnet.checkpoint import build_network
from qnet.optim import Adam
from qnet.symmetry import inverse_permutation, permute_obs, random_permutation, relabel_action
from schedulers.heuristics import random_policy
from schedulers.q_policy import GreedyQPolicy, greedy_q_policy, masked_argmax
from workload.episodes import DEFAULT_SPLIT_BOUNDS, frozen_episodes, sample_episode

CURVE_COLUMNS = ["epoch", "eps", "td_loss", "valid_score"]
EPS_MAX = 0.6


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5000
    batch_size: int = 1024
    lr: float = 0.01
    l2: float = 1e-8
    n_step: int = 50
    eps_start: float = 0.6
    eps_end: float = 0.0
    valid_interval: int = 250
    valid_episodes: int = 150
    test_episodes: int = 1000
    warmup_episodes: int = 100
    gamma: float = 0.99
    target_sync_interval: int = 100
    replay_capacity: int = 200000
    updates_per_epoch: int = 1
    augment_count: int = 23
    aug_collect_interval: int = 24
    episode_len: int = 1000
    truncate: bool = True
    split_bounds: tuple = DEFAULT_SPLIT_BOUNDS
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        positive = ("batch_size", "lr", "n_step", "valid_interval", "valid_episodes",
                    "test_episodes", "target_sync_interval", "replay_capacity",
                    "aug_collect_interval", "episode_len")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("epochs", "warmup_episodes", "updates_per_epoch", "augment_count", "l2"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative, got {getattr(self, name)}")
        for name in ("eps_start", "eps_end"):
            if not 0.0 <= getattr(self, name) <= EPS_MAX:
                raise ConfigurationError(f"{name} must lie in [0, {EPS_MAX}], got {getattr(self, name)}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {self.gamma}")

    @classmethod
    def from_config(cls, config):
        return cls(
            epochs=int(config.EPOCHS),
            batch_size=int(config.BATCH_SIZE),
            lr=float(config.LEARNING_RATE),
            l2=float(config.L2_WEIGHT_DECAY),
            n_step=int(config.N_STEP),
            eps_start=float(config.EPS_START),
            eps_end=float(config.EPS_END),
            valid_interval=int(config.VALID_INTERVAL),
            valid_episodes=int(config.VALID_EPISODES),
            test_episodes=int(config.TEST_EPISODES),
            warmup_episodes=int(config.WARMUP_EPISODES),
            gamma=float(config.GAMMA),
            target_sync_interval=int(config.TARGET_SYNC_INTERVAL),
            replay_capacity=int(config.REPLAY_CAPACITY),
            updates_per_epoch=int(config.UPDATES_PER_EPOCH),
            augment_count=int(config.AUGMENT_COUNT),
            aug_collect_interval=int(config.AUG_COLLECT_INTERVAL),
            episode_len=int(config.EPISODE_LEN),
            truncate=bool(config.TRUNCATE_EPISODES),
            split_bounds=tuple(config.SPLIT_BOUNDS),
            seed=int(config.SEED),
            betas=tuple(config.ADAM_BETAS),
            adam_eps=float(config.ADAM_EPS),
        )

    def epsilon(self, epoch):
        """
        Exploration rate at an epoch: eps_start at epoch 0, eps_end from the last epoch on.
        """
        if self.epochs == 0:
            return self.eps_end
        frac = min(1.0, max(0.0, epoch / self.epochs))
        return self.eps_start + (self.eps_end - self.eps_start) * frac


def augment(transition, sigmas):
    """
    Relabeled copies of a transition, one per permutation.

    PM k of the original becomes PM sigma(k): observations are reordered with
    the inverse permutation and the action is moved with relabel_action, so an
    action feasible in the original observation stays feasible in the copy.

    Args:
        transition (Transition): Original transition.
        sigmas (sequence): 1-based permutations.

    Returns:
        list: One Transition per permutation.
    """
    out = []
    for sigma in sigmas:
        inverse = inverse_permutation(sigma)
        next_obs = transition.next_obs
        out.append(Transition(
            obs=permute_obs(transition.obs, inverse),
            action=relabel_action(transition.action, sigma),
            nstep_reward=transition.nstep_reward,
            next_obs=None if next_obs is None else permute_obs(next_obs, inverse),
            steps=transition.steps,
        ))
    return out


def collect_episode(env, spec, network, eps, rng, memory, n, gamma, augment_count=0):
    """
    Play one epsilon-greedy episode and push its n-step transitions.

    Args:
        env (DvampEnv): Environment.
        spec (EpisodeSpec): Episode to play.
        network (QNetwork): Online network for the greedy choices.
        eps (float): Probability of a uniform feasible action.
        rng (numpy.random.Generator): Exploration and permutation stream.
        memory (ReplayMemory): Destination of the transitions.
        n (int): Window length.
        gamma (float): Discount inside the window.
        augment_count (int): Relabeled copies stored per transition.

    Returns:
        dict: steps, total_wait and stored transitions.
    """
    window = NStepWindow(n, gamma)
    obs = env.reset(spec)
    steps, stored = 0, 0
    while obs is not None:
        feasible = env.feasible_actions()
        if rng.random() < eps:
            action = random_policy(obs, feasible, rng)
        else:
            action = greedy_q_policy(network, obs, feasible)
        outcome = env.step(action)
        for transition in window.push(obs, outcome.info["action"], outcome.reward, outcome.next_obs):
            batch = [transition]
            if augment_count:
                sigmas = [random_permutation(obs.m, rng) for _ in range(augment_count)]
                batch.extend(augment(transition, sigmas))
            for item in batch:
                memory.push(item)
            stored += len(batch)
        obs = outcome.next_obs
        steps += 1
    return {"steps": steps, "total_wait": env.result.total_wait if env.result else 0, "stored": stored}


def td_targets(batch, online, target, gamma):
    """
    Double-DQN n-step targets.

    The online network picks the next action among the actions feasible in
    the successor observation and the target network scores it; truncated
    transitions do not bootstrap.

    Args:
        batch (sequence): Transitions.
        online (QNetwork): Network being trained.
        target (QNetwork): Periodically synced copy.
        gamma (float): Discount.

    Returns:
        numpy.ndarray: One target per transition.
    """
    y = np.array([t.nstep_reward for t in batch], dtype=np.float64)
    idx = [i for i, t in enumerate(batch) if not t.truncated]
    if not idx or gamma == 0.0:
        return y
    next_obs = [batch[i].next_obs for i in idx]
    q_online = online.q_batch(next_obs)
    q_target = target.q_batch(next_obs)
    for row, i in enumerate(idx):
        best = masked_argmax(q_online[row], next_obs[row].feasible_actions())
        y[i] += (gamma ** batch[i].steps) * q_target[row, best - 1]
    return y


@dataclass
class TrainResult:
    network: object
    arch: str
    train_config: TrainConfig
    best_score: float
    best_epoch: int
    curves: list = field(default_factory=list)
    transitions_stored: int = 0
    updates: int = 0

    def curve_frame(self):
        return pd.DataFrame(self.curves, columns=CURVE_COLUMNS)

    def write_curves(self, path, header=None):
        write_csv(self.curve_frame(), path, header)
        logging.info(f"Training curves written to {path}")

    def manifest(self, config_hash=None, extra=None):
        return {
            "arch": self.arch,
            "train_config": asdict(self.train_config),
            "best_score": self.best_score,
            "best_epoch": self.best_epoch,
            "transitions_stored": self.transitions_stored,
            "updates": self.updates,
            "config_hash": config_hash,
            "seed": self.train_config.seed,
            **(extra or {}),
        }

    def write_manifest(self, path, config_hash=None, extra=None):
        try:
            with open(path, 'wb') as file:
                file.write(orjson.dumps(self.manifest(config_hash, extra),
                                        option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2))
            logging.info(f"Run manifest written to {path}")
        except OSError as e:
            logging.error(f"Error writing manifest {path}: {e}")
            raise


def train(train_config, trace, arch, cluster, net_config, workers=1, network=None):
    """
    Train a Q-network and keep the parameters with the lowest validation wait.

    Warmup episodes fill the replay memory without updates. Each epoch then
    plays one collection episode (mlp_aug only every aug_collect_interval
    epochs, storing relabeled copies instead), runs the gradient updates and,
    every valid_interval epochs and at the last one, evaluates the greedy
    policy on the frozen validation episodes.

    Args:
        train_config (TrainConfig): Schedule and optimizer settings.
        trace (WorkloadTrace): Trace covering the train and valid splits.
        arch (str): spane, mlp or mlp_aug.
        cluster (ClusterConfig): Cluster block.
        net_config (Config or type): Network settings.
        workers (int): Threads used for validation episodes.
        network (QNetwork): Optional starting network.

    Returns:
        TrainResult: Best network, its score and the training curves.
    """
    cfg = train_config
    rng = np.random.default_rng(cfg.seed)
    network = network or build_network(arch, net_config, cluster.dim, cluster.m, cfg.seed)
    target = network.copy()
    optimizer = Adam(network.parameters(), lr=cfg.lr, l2=cfg.l2, betas=cfg.betas, eps=cfg.adam_eps)
    memory = ReplayMemory(cfg.replay_capacity, seed=cfg.seed + 1)
    env = DvampEnv(trace, cluster)
    augmenting = arch == "mlp_aug"
    augment_count = cfg.augment_count if augmenting else 0
    interval = cfg.aug_collect_interval if augmenting else 1
    valid_specs = frozen_episodes(trace, "valid", cfg.valid_episodes, cfg.episode_len, cfg.seed,
                                  cfg.truncate, cfg.split_bounds)

    def validate():
        totals = run_episodes(trace, valid_specs, GreedyQPolicy(network), cluster, workers)
        return float(np.mean(totals)) if totals else 0.0

    def play(eps):
        spec = sample_episode(trace, "train", cfg.episode_len, rng, cfg.truncate, cfg.split_bounds)
        return collect_episode(env, spec, network, eps, rng, memory, cfg.n_step, cfg.gamma, augment_count)

    best_score = validate()
    best_network, best_epoch = network.copy(), 0
    curves = [{"epoch": 0, "eps": cfg.epsilon(0), "td_loss": float("nan"), "valid_score": best_score}]
    logging.info(f"Training {arch} on m={cluster.m}: initial validation wait {best_score:.2f}")

    for _ in range(math.ceil(cfg.warmup_episodes / interval)):
        play(cfg.epsilon(0))
    logging.info(f"Warmup stored {memory.total_pushed} transitions")

    updates = 0
    quiet = logging.getLogger().getEffectiveLevel() > logging.INFO
    for epoch in tqdm(range(1, cfg.epochs + 1), desc=f"Training {arch}", disable=quiet):
        eps = cfg.epsilon(epoch)
        if (epoch - 1) % interval == 0:
            play(eps)
        losses = []
        for _ in range(cfg.updates_per_epoch):
            if not len(memory):
                break
            batch = memory.sample(cfg.batch_size)
            y = td_targets(batch, network, target, cfg.gamma)
            loss, grads = network.backward([t.obs for t in batch], [t.action for t in batch], y)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"Non-finite TD loss {loss} at epoch {epoch} after {updates} updates")
            optimizer.step(grads)
            losses.append(loss)
            updates += 1
            if updates % cfg.target_sync_interval == 0:
                target.load_parameters(network.parameters())

        valid_score = float("nan")
        if epoch % cfg.valid_interval == 0 or epoch == cfg.epochs:
            valid_score = validate()
            if valid_score < best_score:
                best_score, best_network, best_epoch = valid_score, network.copy(), epoch
            logging.info(f"Epoch {epoch}: validation wait {valid_score:.2f} (best {best_score:.2f} at {best_epoch})")
        curves.append({
            "epoch": epoch,
            "eps": eps,
            "td_loss": float(np.mean(losses)) if losses else float("nan"),
            "valid_score": valid_score,
        })

    logging.info(f"Selected {arch} parameters from epoch {best_epoch} with validation wait {best_score:.2f}")
    return TrainResult(
        network=best_network,
        arch=arch,
        train_config=cfg,
        best_score=best_score,
        best_epoch=best_epoch,
        curves=curves,
        transitions_stored=memory.total_pushed,
        updates=updates,
    )
