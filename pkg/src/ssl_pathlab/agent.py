"""Soft Actor-Critic on hand-rolled numpy MLPs.

The policy is a squashed Gaussian (tanh of a reparameterized sample) and the
critics are twin Q-networks with slowly tracking target copies. Gradients
are computed by explicit backpropagation; the optional smoothness penalties
(temporal and spatial mean-difference losses) ride along the actor update.
"""

from __future__ import annotations

import json
import math
import os
import zipfile
from dataclasses import dataclass, asdict, field

import numpy as np

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
PRE_TANH_LIMIT = 9.0  # tanh(9) < 1 in float64, keeps eval actions in (-1, 1)
SQUASH_EPS = 1e-6  # keeps log-prob finite when tanh saturates
CHECKPOINT_FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Missing, corrupt, or incompatible checkpoint file."""


@dataclass
class SACConfig:
    gamma: float = 0.99
    tau: float = 0.005
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_alpha: float = 3e-4
    batch_size: int = 256
    buffer_capacity: int = 100_000
    alpha: float = 0.2
    alpha_trainable: bool = True
    caps_enabled: bool = False
    lambda_temporal: float = 4.0
    lambda_spatial: float = 4.0
    sigma_spatial: float = 0.005  # perturbation on goal/obstacle slots
    sigma_spatial_robot: float = 0.3  # perturbation on robot state slots
    warmup_steps: int = 5000  # env steps driven by uniform random actions
    exploration_epsilon: float = 0.1  # post-warmup share of uniform actions
    exploration_target: float = 0.1  # share of target-guided actions
    exploration_target_noise: float = 0.05  # spread around the target slots
    reward_scale: float = 0.05  # scales rewards entering the replay buffer
    huber_delta: float = 10.0  # critic residual where the loss turns linear
    update_interval: int = 16  # env steps between gradient updates
    hidden_sizes: tuple[int, ...] = (256, 256)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.caps_enabled and self.alpha_trainable:
            raise ValueError(
                "alpha must be held constant when the smoothness losses "
                "are enabled (caps_enabled implies alpha_trainable=False)")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be strictly positive")
        if not 0.0 <= self.exploration_epsilon <= 1.0:
            raise ValueError("exploration_epsilon must be in [0, 1]")
        if not 0.0 <= self.exploration_target <= 1.0 - self.exploration_epsilon:
            raise ValueError("exploration_target must be in [0, 1] and "
                             "leave room for exploration_epsilon")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need buffer_capacity >= batch_size >= 1")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)


class MLP:
    """Fully-connected ReLU network mapping (batch, in) -> (batch, out)."""

    def __init__(self, sizes, rng: np.random.Generator,
                 dtype=np.float32):
        self.sizes = tuple(int(s) for s in sizes)
        self.dtype = np.dtype(dtype)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-bound, bound, size=fan_out)
            self.weights.append(w.astype(self.dtype))
            self.biases.append(b.astype(self.dtype))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=self.dtype)
        if h.ndim != 2 or h.shape[1] != self.in_dim:
            raise ValueError(
                f"expected input of shape (batch, {self.in_dim}), "
                f"got {h.shape}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                np.maximum(h, 0.0, out=h)
        return h

    def forward_cached(self, x: np.ndarray):
        """Forward pass that keeps the per-layer activations for backward."""
        h = np.asarray(x, dtype=self.dtype)
        if h.ndim != 2 or h.shape[1] != self.in_dim:
            raise ValueError(
                f"expected input of shape (batch, {self.in_dim}), "
                f"got {h.shape}")
        acts = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                np.maximum(h, 0.0, out=h)
            acts.append(h)
        return h, acts

    def backward(self, acts: list[np.ndarray], dout: np.ndarray):
        """Backpropagate dL/d(output); returns (param grads, dL/d(input)).

        Param grads are ordered like params(): W0, b0, W1, b1, ...
        """
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = np.asarray(dout, dtype=self.dtype)
        for i in range(len(self.weights) - 1, -1, -1):
            if i != len(self.weights) - 1:
                # acts[i + 1] holds relu output; relu' = 1 where output > 0
                delta = delta * (acts[i + 1] > 0.0)
            grads_w[i] = acts[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        return grads, delta

    def clone(self) -> "MLP":
        other = object.__new__(MLP)
        other.sizes = self.sizes
        other.dtype = self.dtype
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other


class Adam:
    """Adam with bias correction over a fixed list of parameter arrays."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def state_arrays(self) -> list[np.ndarray]:
        return self.m + self.v


class ReplayBuffer:
    """Uniform-sampling ring buffer; overwrites the oldest when full."""

    def __init__(self, obs_dim: int, act_dim: int, capacity: int):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.act = np.zeros((capacity, act_dim), dtype=np.float32)
        self.rew = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.terminated = np.zeros(capacity, dtype=np.float32)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act, rew, next_obs, terminated: bool):
        """Store one transition; terminated excludes truncation so that
        truncated transitions still bootstrap."""
        i = self.ptr
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.terminated[i] = 1.0 if terminated else 0.0
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.next_obs[idx], self.terminated[idx])


def _huber(err: np.ndarray, delta: float) -> np.ndarray:
    """Elementwise Huber penalty: err^2 inside delta, linear outside."""
    a = np.abs(err)
    return np.where(a <= delta, err * err, delta * (2.0 * a - delta))


def gaussian_tanh_logp(eps: np.ndarray, log_std: np.ndarray,
                       squashed: np.ndarray) -> np.ndarray:
    """Log-density of a tanh-squashed Gaussian sample, summed over dims.

    eps is the standard-normal draw, log_std the (clamped) per-dim log
    scale, squashed the post-tanh action.
    """
    log2pi = math.log(2.0 * math.pi)
    base = -0.5 * np.square(eps) - log_std - 0.5 * log2pi
    correction = np.log(1.0 - np.square(squashed) + SQUASH_EPS)
    return np.sum(base - correction, axis=1)


def caps_losses(policy: MLP, obs: np.ndarray, next_obs: np.ndarray,
                sigma_spatial: float, rng: np.random.Generator):
    """Temporal and spatial smoothness penalties on the policy mean.

    Temporal: mean squared distance between the means at consecutive
    observations. Spatial: the same against a Gaussian-perturbed copy of the
    observation (scale sigma_spatial per component).
    """
    act_dim = policy.out_dim // 2
    mu = policy.forward(obs)[:, :act_dim]
    mu_next = policy.forward(next_obs)[:, :act_dim]
    noise = rng.standard_normal(obs.shape)
    perturbed = np.asarray(obs, dtype=policy.dtype) + (
        sigma_spatial * noise).astype(policy.dtype)
    mu_pert = policy.forward(perturbed)[:, :act_dim]
    l_temporal = float(np.mean(np.sum(np.square(mu - mu_next), axis=1)))
    l_spatial = float(np.mean(np.sum(np.square(mu - mu_pert), axis=1)))
    return l_temporal, l_spatial


class SACAgent:
    """Twin-critic SAC with optional mean-smoothness regularization.

    spatial_sigma, when given, is a per-observation-dimension noise scale
    for the spatial smoothness term (e.g. large on robot-state slots to
    enforce invariance, small on goal slots to keep conditioning sharp);
    otherwise cfg.sigma_spatial applies to every dimension.
    """

    def __init__(self, obs_dim: int, act_dim: int, cfg: SACConfig,
                 spatial_sigma=None):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.cfg = cfg
        if spatial_sigma is None:
            self.spatial_sigma = np.full(obs_dim, cfg.sigma_spatial,
                                         dtype=np.float32)
        else:
            self.spatial_sigma = np.asarray(spatial_sigma,
                                            dtype=np.float32).reshape(obs_dim)
        init_ss, run_ss = np.random.SeedSequence(cfg.seed).spawn(2)
        init_rng = np.random.default_rng(init_ss)
        self.rng = np.random.default_rng(run_ss)

        hidden = cfg.hidden_sizes
        self.policy = MLP((obs_dim, *hidden, 2 * act_dim), init_rng)
        self.q1 = MLP((obs_dim + act_dim, *hidden, 1), init_rng)
        self.q2 = MLP((obs_dim + act_dim, *hidden, 1), init_rng)
        self.q1_target = self.q1.clone()
        self.q2_target = self.q2.clone()

        self.opt_actor = Adam(self.policy.params(), lr=cfg.lr_actor)
        self.opt_critic = Adam(self.q1.params() + self.q2.params(),
                               lr=cfg.lr_critic)
        self.log_alpha = np.array([math.log(cfg.alpha)], dtype=np.float64)
        self.opt_alpha = Adam([self.log_alpha], lr=cfg.lr_alpha)
        self.target_entropy = -float(act_dim)
        self.updates = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    # -- acting ------------------------------------------------------------

    def select_action(self, obs, deterministic: bool = False) -> np.ndarray:
        x = np.asarray(obs, dtype=self.policy.dtype).reshape(1, self.obs_dim)
        out = self.policy.forward(x)[0]
        mu = out[:self.act_dim]
        if deterministic:
            u = mu.astype(np.float64)
        else:
            log_std = np.clip(out[self.act_dim:], LOG_STD_MIN, LOG_STD_MAX)
            std = np.exp(log_std.astype(np.float64))
            u = mu.astype(np.float64) + std * self.rng.standard_normal(
                self.act_dim)
        u = np.clip(u, -PRE_TANH_LIMIT, PRE_TANH_LIMIT)
        return np.tanh(u)

    # -- learning ----------------------------------------------------------

    def update(self, buffer: ReplayBuffer) -> dict:
        """One gradient step on critics, actor (and alpha if trainable)."""
        cfg = self.cfg
        if cfg.caps_enabled:
            assert not cfg.alpha_trainable, \
                "alpha must stay constant while smoothness losses are on"
        if len(buffer) < cfg.batch_size:
            raise ValueError(
                f"buffer holds {len(buffer)} transitions; "
                f"need at least batch_size={cfg.batch_size}")
        obs, act, rew, next_obs, term = buffer.sample(cfg.batch_size,
                                                      self.rng)
        B = cfg.batch_size
        da = self.act_dim
        alpha = self.alpha

        # Critic targets from the frozen copies.
        out_n = self.policy.forward(next_obs)
        mu_n = out_n[:, :da]
        log_std_n = np.clip(out_n[:, da:], LOG_STD_MIN, LOG_STD_MAX)
        std_n = np.exp(log_std_n)
        eps_n = self.rng.standard_normal((B, da)).astype(self.policy.dtype)
        a_n = np.tanh(mu_n + std_n * eps_n)
        logp_n = gaussian_tanh_logp(eps_n, log_std_n, a_n)
        xq_n = np.concatenate([next_obs, a_n], axis=1)
        q_n = np.minimum(self.q1_target.forward(xq_n),
                         self.q2_target.forward(xq_n))[:, 0]
        y = rew + cfg.gamma * (1.0 - term) * (q_n - alpha * logp_n)
        y = y.astype(self.q1.dtype)

        # Critic regression under a Huber loss: quadratic for residuals up
        # to huber_delta, linear beyond, so rare huge-bonus targets cannot
        # blow up a batch gradient.
        xq = np.concatenate([obs, act], axis=1)
        q1_pred, c1 = self.q1.forward_cached(xq)
        q2_pred, c2 = self.q2.forward_cached(xq)
        err1 = q1_pred[:, 0] - y
        err2 = q2_pred[:, 0] - y
        delta = cfg.huber_delta
        critic_loss = float(_huber(err1, delta).mean()
                            + _huber(err2, delta).mean())
        d1 = (2.0 / B) * np.clip(err1, -delta, delta)
        d2 = (2.0 / B) * np.clip(err2, -delta, delta)
        g1, _ = self.q1.backward(c1, d1[:, None])
        g2, _ = self.q2.backward(c2, d2[:, None])
        self.opt_critic.step(self.q1.params() + self.q2.params(), g1 + g2)

        # Actor step. Noise is drawn here so the gradient computation stays
        # a pure (finite-difference checkable) function of the parameters.
        eps = self.rng.standard_normal((B, da)).astype(self.policy.dtype)
        spatial_noise = None
        if cfg.caps_enabled:
            spatial_noise = (self.spatial_sigma * self.rng.standard_normal(
                obs.shape)).astype(obs.dtype)
        actor_loss, ga, aux = self._actor_loss_and_grads(
            obs, next_obs, eps, spatial_noise)
        l_temporal = aux["caps_temporal"]
        l_spatial = aux["caps_spatial"]
        logp = aux["logp"]
        self.opt_actor.step(self.policy.params(), ga)

        if cfg.alpha_trainable:
            grad_la = -float(np.mean(logp + self.target_entropy))
            self.opt_alpha.step([self.log_alpha], [np.array([grad_la])])

        # Soft target tracking.
        tau = cfg.tau
        for target, online in ((self.q1_target, self.q1),
                               (self.q2_target, self.q2)):
            for pt, p in zip(target.params(), online.params()):
                pt *= (1.0 - tau)
                pt += tau * p

        self.updates += 1
        return {
            "critic_loss": critic_loss,
            "actor_loss": actor_loss,
            "caps_temporal": l_temporal,
            "caps_spatial": l_spatial,
            "alpha": self.alpha,
            "entropy": float(-np.mean(logp)),
        }

    def _actor_loss_and_grads(self, obs, next_obs, eps, spatial_noise):
        """Actor objective and its policy-parameter gradients.

        obs/next_obs are a sampled batch and eps the standard-normal draw
        for the reparameterized actions; spatial_noise (or None) is the
        observation perturbation for the spatial smoothness term. Given
        those fixed inputs this is a deterministic function of the policy
        parameters, with the critics held fixed.
        """
        cfg = self.cfg
        B = obs.shape[0]
        da = self.act_dim
        alpha = self.alpha

        if spatial_noise is not None:
            stacked = np.concatenate(
                [obs, next_obs, obs + spatial_noise], axis=0)
        else:
            stacked = obs
        out, cache = self.policy.forward_cached(stacked)
        mu = out[:B, :da]
        raw_log_std = out[:B, da:]
        log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        u = mu + std * eps
        a_pi = np.tanh(u)
        logp = gaussian_tanh_logp(eps, log_std, a_pi)

        xq_pi = np.concatenate([obs, a_pi], axis=1)
        qa1, ca1 = self.q1.forward_cached(xq_pi)
        qa2, ca2 = self.q2.forward_cached(xq_pi)
        q_pi = np.minimum(qa1, qa2)[:, 0]
        actor_loss = float(alpha * np.mean(logp) - np.mean(q_pi))

        # dL/da through the per-sample argmin critic, params held fixed.
        use1 = (qa1 <= qa2).astype(self.q1.dtype)
        _, dx1 = self.q1.backward(ca1, (-1.0 / B) * use1)
        _, dx2 = self.q2.backward(ca2, (-1.0 / B) * (1.0 - use1))
        dl_da = (dx1 + dx2)[:, self.obs_dim:]

        one_m_t2 = 1.0 - np.square(a_pi)
        dlogp_du = 2.0 * a_pi * one_m_t2 / (one_m_t2 + SQUASH_EPS)
        g_u = (alpha / B) * dlogp_du + dl_da * one_m_t2
        g_log_std = g_u * (std * eps) - (alpha / B)
        # the clamp on log-std gates its gradient
        g_log_std *= ((raw_log_std > LOG_STD_MIN) &
                      (raw_log_std < LOG_STD_MAX))

        dout = np.zeros_like(out)
        dout[:B, :da] = g_u
        dout[:B, da:] = g_log_std

        l_temporal = l_spatial = 0.0
        if spatial_noise is not None:
            mu_next = out[B:2 * B, :da]
            mu_pert = out[2 * B:, :da]
            diff_t = mu - mu_next
            diff_s = mu - mu_pert
            l_temporal = float(np.mean(np.sum(np.square(diff_t), axis=1)))
            l_spatial = float(np.mean(np.sum(np.square(diff_s), axis=1)))
            actor_loss += (cfg.lambda_temporal * l_temporal +
                           cfg.lambda_spatial * l_spatial)
            dout[:B, :da] += (2.0 * cfg.lambda_temporal / B) * diff_t
            dout[:B, :da] += (2.0 * cfg.lambda_spatial / B) * diff_s
            dout[B:2 * B, :da] = -(2.0 * cfg.lambda_temporal / B) * diff_t
            dout[2 * B:, :da] = -(2.0 * cfg.lambda_spatial / B) * diff_s

        grads, _ = self.policy.backward(cache, dout)
        aux = {"caps_temporal": l_temporal, "caps_spatial": l_spatial,
               "logp": logp}
        return actor_loss, grads, aux

    # -- persistence ---------------------------------------------------------

    def _named_nets(self):
        return (("pi", self.policy), ("q1", self.q1), ("q2", self.q2),
                ("q1t", self.q1_target), ("q2t", self.q2_target))

    def save(self, path: str) -> None:
        """Write a versioned .npz checkpoint (parameters, optimizer moments,
        entropy coefficient, RNG state)."""
        arrays = {}
        for name, net in self._named_nets():
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                arrays[f"{name}_W{i}"] = w
                arrays[f"{name}_b{i}"] = b
        for name, opt in (("oa", self.opt_actor), ("oc", self.opt_critic),
                          ("ol", self.opt_alpha)):
            for i, arr in enumerate(opt.state_arrays()):
                arrays[f"{name}_s{i}"] = arr
            arrays[f"{name}_t"] = np.array(opt.t, dtype=np.int64)
        arrays["log_alpha"] = self.log_alpha
        meta = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "updates": self.updates,
            "config": asdict(self.cfg),
            "spatial_sigma": self.spatial_sigma.tolist(),
            "rng_state": self.rng.bit_generator.state,
        }
        arrays["meta"] = np.array(json.dumps(meta))
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path: str) -> "SACAgent":
        if not os.path.exists(path):
            raise CheckpointError(f"checkpoint not found: {path}")
        try:
            data = np.load(path, allow_pickle=False)
            meta = json.loads(str(data["meta"]))
        except (zipfile.BadZipFile, ValueError, KeyError, EOFError,
                OSError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint {path!r}: {exc}")
        version = meta.get("format_version")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(
                f"checkpoint format version {version} not supported "
                f"(expected {CHECKPOINT_FORMAT_VERSION})")
        cfg_dict = dict(meta["config"])
        cfg_dict["hidden_sizes"] = tuple(cfg_dict["hidden_sizes"])
        cfg = SACConfig(**cfg_dict)
        agent = cls(meta["obs_dim"], meta["act_dim"], cfg,
                    spatial_sigma=meta.get("spatial_sigma"))
        try:
            for name, net in agent._named_nets():
                for i in range(len(net.weights)):
                    net.weights[i][...] = data[f"{name}_W{i}"]
                    net.biases[i][...] = data[f"{name}_b{i}"]
            for name, opt in (("oa", agent.opt_actor),
                              ("oc", agent.opt_critic),
                              ("ol", agent.opt_alpha)):
                state = opt.state_arrays()
                for i, arr in enumerate(state):
                    arr[...] = data[f"{name}_s{i}"]
                opt.t = int(data[f"{name}_t"])
            agent.log_alpha[...] = data["log_alpha"]
        except KeyError as exc:
            raise CheckpointError(f"corrupt checkpoint {path!r}: missing "
                                  f"array {exc}")
        agent.updates = int(meta["updates"])
        agent.rng.bit_generator.state = meta["rng_state"]
        return agent
