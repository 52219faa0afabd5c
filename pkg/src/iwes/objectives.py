"""Objectives: analytic benchmarks and a small goal-reaching control task.

Every objective exposes evaluate(params, episode_seed) -> (return,
env_steps), a dim, and a deterministic flag.  Returns are maximized, so
the benchmark functions come back negated.
"""

import math
from dataclasses import dataclass

import numpy as np

from .pool import derive_episode_seed

__all__ = [
    "Objective",
    "BenchmarkObjective",
    "make_benchmark",
    "MlpPolicy",
    "PointMassEnv",
    "PointMassObjective",
    "rollout",
    "evaluate_policy_median",
]


class Objective:
    """Duck-typed interface; subclassing is optional."""

    dim: int
    deterministic: bool

    def evaluate(self, params: np.ndarray, episode_seed: int) -> tuple[float, int]:
        raise NotImplementedError


def _sphere(x: np.ndarray) -> float:
    return float(np.dot(x, x))


def _rastrigin(x: np.ndarray) -> float:
    # minimum is at f(0, ..., 0) = 0
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * math.pi * x)))


def _rosenbrock(x: np.ndarray) -> float:
    # minimum is at f(1, ..., 1) = 0
    return float(
        np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2)
    )


_BENCHMARKS = {
    "sphere": _sphere,
    "rastrigin": _rastrigin,
    "rosenbrock": _rosenbrock,
}


@dataclass(frozen=True)
class BenchmarkObjective(Objective):
    """Negated analytic test function; one env step per evaluation."""

    name: str
    dim: int
    deterministic: bool = True

    def evaluate(self, params: np.ndarray, episode_seed: int) -> tuple[float, int]:
        return -_BENCHMARKS[self.name](np.asarray(params, dtype=np.float64)), 1


def make_benchmark(name: str, dim: int) -> BenchmarkObjective:
    if name not in _BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; have {sorted(_BENCHMARKS)}")
    if dim < 1 or (name == "rosenbrock" and dim < 2):
        raise ValueError(f"dim {dim} too small for {name}")
    return BenchmarkObjective(name=name, dim=dim)


class MlpPolicy:
    """4 -> hidden -> hidden -> 2 network, tanh hidden, linear output.

    Parameters are one flat vector, layer by layer, weights before
    biases: [W1 (h x 4), b1, W2 (h x h), b2, W3 (2 x h), b3].
    """

    OBS_DIM = 4
    ACT_DIM = 2

    def __init__(self, hidden: int):
        if hidden < 1:
            raise ValueError(f"hidden must be >= 1, got {hidden}")
        self.hidden = hidden
        h, o, a = hidden, self.OBS_DIM, self.ACT_DIM
        self.num_params = o * h + h + h * h + h + h * a + a
        ends = np.cumsum([o * h, h, h * h, h, h * a, a])
        self._bounds = [0, *map(int, ends)]

    def unpack(self, theta: np.ndarray):
        """Slice one flat vector into weight/bias views (no copies)."""
        if theta.size != self.num_params:
            raise ValueError(
                f"expected {self.num_params} params, got {theta.size}"
            )
        b = self._bounds
        h, o, a = self.hidden, self.OBS_DIM, self.ACT_DIM
        return (
            theta[b[0] : b[1]].reshape(h, o),
            theta[b[1] : b[2]],
            theta[b[2] : b[3]].reshape(h, h),
            theta[b[3] : b[4]],
            theta[b[4] : b[5]].reshape(a, h),
            theta[b[5] : b[6]],
        )

    @staticmethod
    def forward(views, obs: np.ndarray) -> np.ndarray:
        w1, b1, w2, b2, w3, b3 = views
        hid = np.tanh(w1 @ obs + b1)
        hid = np.tanh(w2 @ hid + b2)
        return w3 @ hid + b3


class PointMassEnv:
    """2-D point mass steering toward a goal sampled per episode.

    Goal ~ uniform [-1, 1]^2 from PCG64(episode_seed).  Per step, with
    the action clamped to [-1, 1]^2:
        v <- 0.9 v + 0.1 a
        p <- p + 0.1 v
        reward = -|p - g|^2   (after the move)
    Observation is (g - p, v); start is p = v = 0.
    """

    def __init__(self, horizon: int = 50):
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.horizon = horizon
        self._gx = self._gy = 0.0
        self._px = self._py = self._vx = self._vy = 0.0
        self._t = 0

    def reset(self, episode_seed: int) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(episode_seed))
        self._gx, self._gy = map(float, rng.uniform(-1.0, 1.0, size=2))
        self._px = self._py = self._vx = self._vy = 0.0
        self._t = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.array(
            [self._gx - self._px, self._gy - self._py, self._vx, self._vy]
        )

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, bool]:
        ax = min(1.0, max(-1.0, float(action[0])))
        ay = min(1.0, max(-1.0, float(action[1])))
        self._vx = 0.9 * self._vx + 0.1 * ax
        self._vy = 0.9 * self._vy + 0.1 * ay
        self._px = self._px + 0.1 * self._vx
        self._py = self._py + 0.1 * self._vy
        dx = self._px - self._gx
        dy = self._py - self._gy
        reward = -(dx * dx + dy * dy)
        self._t += 1
        return self._obs(), reward, self._t >= self.horizon


def rollout(
    env: PointMassEnv, policy: MlpPolicy, params: np.ndarray, episode_seed: int
) -> tuple[float, int]:
    """One full episode; returns (sum of rewards, env steps consumed)."""
    obs = env.reset(episode_seed)
    views = policy.unpack(params)
    total = 0.0
    for _ in range(env.horizon):
        obs, reward, done = env.step(policy.forward(views, obs))
        total += reward
        if done:
            break
    return total, env.horizon


class PointMassObjective(Objective):
    """Point-mass episodes as an objective; one fresh env per call so
    concurrent evaluations never share state."""

    deterministic = False

    def __init__(self, policy: MlpPolicy, horizon: int = 50):
        self.policy = policy
        self.horizon = horizon
        self.dim = policy.num_params

    def evaluate(self, params: np.ndarray, episode_seed: int) -> tuple[float, int]:
        return rollout(PointMassEnv(self.horizon), self.policy, params, episode_seed)


def evaluate_policy_median(
    objective, params: np.ndarray, n_eval: int, seed_base: int
) -> tuple[float, int]:
    """Median return over n_eval episodes (even n: mean of the two
    central values).  Episode i uses derive_episode_seed(seed_base, i).
    Returns the median and the env steps the evaluation consumed."""
    if n_eval < 1:
        raise ValueError(f"n_eval must be >= 1, got {n_eval}")
    returns = np.empty(n_eval)
    steps = 0
    for i in range(n_eval):
        ret, ep_steps = objective.evaluate(params, derive_episode_seed(seed_base, i))
        returns[i] = ret
        steps += int(ep_steps)
    return float(np.median(returns)), steps
