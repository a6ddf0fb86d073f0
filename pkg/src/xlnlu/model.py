"""Joint slot-filling / intent-detection network.

BiLSTM encoder over (optionally noise-injected) embeddings, scalar-score
attention pooling, and one of three prediction heads:

* ``lvm``  — Gaussian recognition/generation pairs per token and per
  sentence; latents are sampled (reparameterized) in training and replaced
  by their means at inference.
* ``mlp``  — the latent layer swapped for a deterministic tanh layer of the
  same size.
* ``crf``  — linear-chain CRF over slot labels; the intent branch classifies
  the attention context directly.

The training loss is the summed slot and intent negative log-likelihood;
there is deliberately no KL(q || prior) term in the objective. Readers
expecting a VAE-style ELBO should note the latent heads are trained purely
on the single-sample reconstruction likelihood.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Node, Tape
from .crf import crf_nll, viterbi
from .errors import ConfigError
from .linalg import LOG_VAR_MAX, LOG_VAR_MIN

HEADS = ("lvm", "mlp", "crf")


@dataclass
class ModelConfig:
    embedding_dim: int
    n_slots: int
    n_intents: int
    hidden_size: int = 250
    latent_size: int = 100
    head: str = "lvm"
    noise_variance: float = 0.1
    noise_enabled: bool = True

    def __post_init__(self):
        if self.head not in HEADS:
            raise ConfigError(
                f"unknown head {self.head!r}; expected one of {HEADS}")
        for name in ("embedding_dim", "n_slots", "n_intents",
                     "hidden_size", "latent_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.noise_variance < 0:
            raise ConfigError("noise_variance must be >= 0")


@dataclass
class ForwardTrace:
    """Per-utterance forward pass record (numpy snapshots + the loss node)."""

    noisy_embeddings: np.ndarray
    hidden: np.ndarray                      # (T, 2H)
    attention: np.ndarray                   # (T,)
    context: np.ndarray                     # (2H,)
    slot_probs: np.ndarray                  # (T, K)
    intent_probs: np.ndarray                # (K',)
    slot_mu: np.ndarray | None = None
    slot_logvar: np.ndarray | None = None
    slot_z: np.ndarray | None = None
    intent_mu: np.ndarray | None = None
    intent_logvar: np.ndarray | None = None
    intent_z: np.ndarray | None = None
    slot_path: list[int] | None = None      # CRF Viterbi decode
    loss: Node | None = None


def inject_noise(e: np.ndarray, variance: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Add an independent N(0, variance) draw to every embedding entry.

    A fresh draw is taken on every call, so repeated passes over the same
    utterance see different perturbations."""
    if variance < 0:
        raise ConfigError("noise variance must be >= 0")
    if variance == 0.0:
        return e
    return e + np.sqrt(variance) * rng.standard_normal(e.shape)


def init_params(config: ModelConfig, rng: np.random.Generator
                ) -> dict[str, np.ndarray]:
    """Uniform(-0.08, 0.08) recurrent weights, Xavier projections, zero
    biases except the forget gate (init 1)."""
    e, h, l = config.embedding_dim, config.hidden_size, config.latent_size
    k, ki = config.n_slots, config.n_intents

    def xavier(n_in, n_out):
        bound = np.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-bound, bound, size=(n_in, n_out))

    def recurrent(n_in, n_out):
        return rng.uniform(-0.08, 0.08, size=(n_in, n_out))

    params: dict[str, np.ndarray] = {}
    for d in ("f", "b"):
        params[f"lstm_{d}_wx"] = xavier(e, 4 * h)
        params[f"lstm_{d}_wh"] = recurrent(h, 4 * h)
        bias = np.zeros((1, 4 * h))
        bias[0, h:2 * h] = 1.0                      # forget gate
        params[f"lstm_{d}_b"] = bias
    params["attn_w"] = xavier(2 * h, 1)

    if config.head == "lvm":
        params["slot_rec_w"] = xavier(2 * h, 2 * l)
        params["slot_rec_b"] = np.zeros((1, 2 * l))
        params["intent_rec_w"] = xavier(2 * h, 2 * l)
        params["intent_rec_b"] = np.zeros((1, 2 * l))
        params["slot_gen_w"] = xavier(l, k)
        params["slot_gen_b"] = np.zeros((1, k))
        params["intent_gen_w"] = xavier(l, ki)
        params["intent_gen_b"] = np.zeros((1, ki))
    elif config.head == "mlp":
        params["slot_mlp_w"] = xavier(2 * h, l)
        params["slot_mlp_b"] = np.zeros((1, l))
        params["intent_mlp_w"] = xavier(2 * h, l)
        params["intent_mlp_b"] = np.zeros((1, l))
        params["slot_gen_w"] = xavier(l, k)
        params["slot_gen_b"] = np.zeros((1, k))
        params["intent_gen_w"] = xavier(l, ki)
        params["intent_gen_b"] = np.zeros((1, ki))
    else:  # crf
        params["emit_w"] = xavier(2 * h, k)
        params["emit_b"] = np.zeros((1, k))
        params["crf_trans"] = np.zeros((k, k))
        params["intent_gen_w"] = xavier(2 * h, ki)
        params["intent_gen_b"] = np.zeros((1, ki))
    return params


def _affine(tape: Tape, x: Node, w: Node, b: Node) -> Node:
    return tape.add(tape.matmul(x, w), b)


def _lstm_direction(tape: Tape, rows: list[Node], wx: Node, wh: Node,
                    b: Node, hidden: int, reverse: bool) -> list[Node]:
    order = range(len(rows) - 1, -1, -1) if reverse else range(len(rows))
    h_prev = tape.constant(np.zeros((1, hidden)))
    c_prev = tape.constant(np.zeros((1, hidden)))
    out: dict[int, Node] = {}
    for t in order:
        gates = tape.add(_affine(tape, rows[t], wx, b),
                         tape.matmul(h_prev, wh))
        i = tape.sigmoid(tape.slice_cols(gates, 0, hidden))
        f = tape.sigmoid(tape.slice_cols(gates, hidden, 2 * hidden))
        g = tape.tanh(tape.slice_cols(gates, 2 * hidden, 3 * hidden))
        o = tape.sigmoid(tape.slice_cols(gates, 3 * hidden, 4 * hidden))
        c_prev = tape.add(tape.mul(f, c_prev), tape.mul(i, g))
        h_prev = tape.mul(o, tape.tanh(c_prev))
        out[t] = h_prev
    return [out[t] for t in range(len(rows))]


def bilstm_forward(tape: Tape, emb: Node, leaves: dict[str, Node],
                   hidden: int) -> Node:
    """Run both directions and concatenate states: returns the (T, 2H) node."""
    t_len = emb.value.shape[0]
    rows = [tape.slice_rows(emb, t, t + 1) for t in range(t_len)]
    fwd = _lstm_direction(tape, rows, leaves["lstm_f_wx"], leaves["lstm_f_wh"],
                          leaves["lstm_f_b"], hidden, reverse=False)
    bwd = _lstm_direction(tape, rows, leaves["lstm_b_wx"], leaves["lstm_b_wh"],
                          leaves["lstm_b_b"], hidden, reverse=True)
    h_rows = [tape.concat([fwd[t], bwd[t]], axis=1) for t in range(t_len)]
    return tape.concat(h_rows, axis=0)


def attend(tape: Tape, h_mat: Node, w_a: Node) -> tuple[Node, Node]:
    """Scalar scores m_t = <h_t, w_a>, softmax weights, weighted sum context."""
    m = tape.matmul(h_mat, w_a)                 # (T, 1)
    a = tape.softmax(m, axis=0)
    v = tape.matmul(tape.transpose(a), h_mat)   # (1, 2H)
    return a, v


def recognize(tape: Tape, x: Node, w: Node, b: Node,
              latent: int) -> tuple[Node, Node]:
    """Affine map to [mu ; log variance]; log variance is clamped."""
    out = _affine(tape, x, w, b)
    mu = tape.slice_cols(out, 0, latent)
    logvar = tape.clamp(tape.slice_cols(out, latent, 2 * latent),
                        LOG_VAR_MIN, LOG_VAR_MAX)
    return mu, logvar


def reparameterize(tape: Tape, mu: Node, logvar: Node, eps: np.ndarray) -> Node:
    std = tape.exp(tape.scale(logvar, 0.5))
    return tape.add(mu, tape.mul(std, tape.constant(eps)))


def _nll(tape: Tape, logits: Node, gold: np.ndarray) -> Node:
    gold = np.asarray(gold, dtype=np.intp)
    logp = tape.sub(logits, tape.logsumexp(logits, axis=1, keepdims=True))
    picked = tape.pick(logp, np.arange(len(gold)), gold)
    return tape.scale(tape.sum(picked), -1.0)


class Model:
    """Parameter container plus the tape-building forward pass."""

    def __init__(self, config: ModelConfig,
                 params: dict[str, np.ndarray] | None = None,
                 rng: np.random.Generator | None = None):
        self.config = config
        if params is None:
            params = init_params(config, rng or np.random.default_rng(0))
        self.params = params

    # ----------------------------------------------------------------- forward

    def forward(self, tape: Tape, leaves: dict[str, Node],
                embeddings: np.ndarray, mode: str,
                rng: np.random.Generator | None,
                gold_slots: np.ndarray | None = None,
                gold_intent: int | None = None) -> ForwardTrace:
        """Build the forward graph for one utterance on `tape`.

        mode "train" samples latents and (if enabled) injects embedding
        noise; mode "infer" is fully deterministic and never touches rng.
        """
        cfg = self.config
        if mode not in ("train", "infer"):
            raise ConfigError(f"unknown mode {mode!r}")
        if mode == "train" and cfg.noise_enabled and cfg.noise_variance > 0:
            e_star = inject_noise(embeddings, cfg.noise_variance, rng)
        else:
            e_star = embeddings

        emb = tape.constant(e_star)
        h_mat = bilstm_forward(tape, emb, leaves, cfg.hidden_size)
        a, v = attend(tape, h_mat, leaves["attn_w"])
        t_len = embeddings.shape[0]

        trace = ForwardTrace(
            noisy_embeddings=e_star,
            hidden=h_mat.value,
            attention=a.value[:, 0].copy(),
            context=v.value[0].copy(),
            slot_probs=np.empty(0),
            intent_probs=np.empty(0),
        )

        if cfg.head == "lvm":
            mu_s, lv_s = recognize(tape, h_mat, leaves["slot_rec_w"],
                                   leaves["slot_rec_b"], cfg.latent_size)
            mu_i, lv_i = recognize(tape, v, leaves["intent_rec_w"],
                                   leaves["intent_rec_b"], cfg.latent_size)
            if mode == "train":
                z_s = reparameterize(
                    tape, mu_s, lv_s,
                    rng.standard_normal((t_len, cfg.latent_size)))
                z_i = reparameterize(
                    tape, mu_i, lv_i,
                    rng.standard_normal((1, cfg.latent_size)))
            else:
                z_s, z_i = mu_s, mu_i
            slot_logits = _affine(tape, z_s, leaves["slot_gen_w"],
                                  leaves["slot_gen_b"])
            intent_logits = _affine(tape, z_i, leaves["intent_gen_w"],
                                    leaves["intent_gen_b"])
            trace.slot_mu = mu_s.value.copy()
            trace.slot_logvar = lv_s.value.copy()
            trace.slot_z = z_s.value.copy()
            trace.intent_mu = mu_i.value[0].copy()
            trace.intent_logvar = lv_i.value[0].copy()
            trace.intent_z = z_i.value[0].copy()
        elif cfg.head == "mlp":
            z_s = tape.tanh(_affine(tape, h_mat, leaves["slot_mlp_w"],
                                    leaves["slot_mlp_b"]))
            z_i = tape.tanh(_affine(tape, v, leaves["intent_mlp_w"],
                                    leaves["intent_mlp_b"]))
            slot_logits = _affine(tape, z_s, leaves["slot_gen_w"],
                                  leaves["slot_gen_b"])
            intent_logits = _affine(tape, z_i, leaves["intent_gen_w"],
                                    leaves["intent_gen_b"])
        else:  # crf
            slot_logits = _affine(tape, h_mat, leaves["emit_w"],
                                  leaves["emit_b"])
            intent_logits = _affine(tape, v, leaves["intent_gen_w"],
                                    leaves["intent_gen_b"])
            trace.slot_path, _ = viterbi(slot_logits.value,
                                         leaves["crf_trans"].value)

        trace.slot_probs = tape.softmax(slot_logits, axis=1).value
        trace.intent_probs = tape.softmax(intent_logits, axis=1).value[0]

        if gold_slots is not None and gold_intent is not None:
            if cfg.head == "crf":
                slot_loss = crf_nll(tape, slot_logits, leaves["crf_trans"],
                                    gold_slots)
            else:
                slot_loss = _nll(tape, slot_logits, gold_slots)
            intent_loss = _nll(tape, intent_logits, np.array([gold_intent]))
            trace.loss = tape.add(slot_loss, intent_loss)
        return trace

    def decode(self, trace: ForwardTrace) -> tuple[list[int], int]:
        """Slot path and intent index from a forward trace."""
        if self.config.head == "crf":
            slots = list(trace.slot_path)
        else:
            slots = [int(i) for i in trace.slot_probs.argmax(axis=1)]
        return slots, int(trace.intent_probs.argmax())

    def predict(self, embeddings: np.ndarray) -> tuple[list[int], int,
                                                       ForwardTrace]:
        """Deterministic inference: mean substitution, no noise, no rng."""
        tape = Tape()
        leaves = self.make_leaves(tape)
        trace = self.forward(tape, leaves, embeddings, mode="infer", rng=None)
        slots, intent = self.decode(trace)
        return slots, intent, trace

    def make_leaves(self, tape: Tape) -> dict[str, Node]:
        return {name: tape.leaf(val) for name, val in self.params.items()}

    # ------------------------------------------------------------- persistence

    def save(self, path: str) -> None:
        """Checkpoint: npz with every tensor plus the config as JSON."""
        payload = dict(self.params)
        payload["__config__"] = np.frombuffer(
            json.dumps(asdict(self.config), sort_keys=True).encode("utf-8"),
            dtype=np.uint8).copy()
        np.savez(path, **payload)

    @classmethod
    def load(cls, path: str) -> "Model":
        with np.load(path, allow_pickle=False) as data:
            raw = {k: data[k].copy() for k in data.files}
        cfg_bytes = raw.pop("__config__").tobytes()
        config = ModelConfig(**json.loads(cfg_bytes.decode("utf-8")))
        return cls(config, params=raw)
