"""
Alternating critic / generator optimization.

One training step:
1. Draw a batch with numpy's default_rng([seed, step]).
2. Harmonize the batch with the current generator (constants for the critics).
3. d_steps_per_g critic updates on L_D, each followed by clipping every
   critic weight to [-clip_c, clip_c].
4. One generator update on L_G through encode -> branches -> compose_local ->
   inverse_warp_compose -> both critics, plus the identity term G(Y, y) vs y.

Randomness depends only on (seed, step), so a run resumed from a checkpoint
reproduces an uninterrupted run bit-for-bit.

Usage:
    state = init_state(TrainConfig(steps=200))
    prepared = [prepare_sample(s, state.config) for s in load_corpus(path)]
    train(state, prepared, steps=200)
"""

import logging
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError as PydanticValidationError

from illumcomp.core.tensor import Tape, Tensor, stack_mean
from illumcomp.data.synth import CompositeSample
from illumcomp.geometry.stm import extract_local, inverse_warp_compose
from illumcomp.illumination.sh import illum_map_for_critic
from illumcomp.models.checkpoint import load_checkpoint, save_checkpoint
from illumcomp.models.networks import (
    discriminate_global,
    discriminate_local,
    generate,
    init_critics,
    init_generator,
)
from illumcomp.models.params import ParamSet
from illumcomp.training.config import TrainConfig
from illumcomp.training.losses import (
    LossParts,
    global_adv_losses,
    identity_loss,
    local_adv_losses,
    total_losses,
)
from illumcomp.training.optimizer import Adadelta
from illumcomp.utils.errors import (
    ConfigValidationError,
    NonFiniteLossError,
    ShapeMismatchError,
    StorageError,
    ValidationError,
)

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["step", "L_D_L", "L_G_L", "L_D_G", "L_G_G", "L_S_idt"]


# ============================================================================
# STATE
# ============================================================================

class TrainState:
    """
    Everything that evolves during training.

    Attributes:
        config (TrainConfig): Run configuration
        generator (ParamSet): Generator parameters
        critic_local (ParamSet): Local critic parameters
        critic_global (ParamSet): Global critic parameters
        opt_g, opt_dl, opt_dg (Adadelta): One optimizer per network
        step (int): Completed steps
        history (List[Dict[str, float]]): One row per step, HISTORY_COLUMNS keys
    """

    def __init__(
        self,
        config: TrainConfig,
        generator: ParamSet,
        critic_local: ParamSet,
        critic_global: ParamSet,
        step: int = 0,
        history: Optional[List[Dict[str, float]]] = None
    ) -> None:
        self.config = config
        self.generator = generator
        self.critic_local = critic_local
        self.critic_global = critic_global
        self.opt_g = self._optimizer(generator)
        self.opt_dl = self._optimizer(critic_local)
        self.opt_dg = self._optimizer(critic_global)
        self.step = step
        self.history = history or []

    def _optimizer(self, params: ParamSet) -> Adadelta:
        return Adadelta(params, lr=self.config.learning_rate, rho=self.config.rho, eps=self.config.adadelta_eps)

    @property
    def seed(self) -> int:
        return self.config.seed

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.history, columns=HISTORY_COLUMNS)

    def groups(self) -> Dict[str, Dict[str, np.ndarray]]:
        """Checkpoint groups: networks, optimizer accumulators and the loss history."""
        groups = {
            "generator": self.generator.to_arrays(),
            "critic_local": self.critic_local.to_arrays(),
            "critic_global": self.critic_global.to_arrays(),
        }
        groups.update(self.opt_g.state_groups("opt_g"))
        groups.update(self.opt_dl.state_groups("opt_dl"))
        groups.update(self.opt_dg.state_groups("opt_dg"))
        frame = self.history_frame()
        groups["history"] = {col: frame[col].to_numpy(dtype=np.float64) for col in HISTORY_COLUMNS}
        return groups

    def __repr__(self) -> str:
        return f"TrainState(step={self.step}, seed={self.seed}, generator={self.generator.num_parameters()} values)"


def init_state(config: TrainConfig) -> TrainState:
    """Fresh state: seeded generator and critics, zero accumulators."""
    generator = init_generator(config.network, config.seed)
    critic_local, critic_global = init_critics(config.network, config.seed, config.loss_weights.clip_c)
    logger.info(f"Initialized generator ({generator.num_parameters()} values) and critics "
                f"({critic_local.num_parameters()} + {critic_global.num_parameters()} values)")
    return TrainState(config, generator, critic_local, critic_global)


def save_state(path: Path, state: TrainState) -> Path:
    return save_checkpoint(path, state.groups(), config=state.config.model_dump(mode="json"),
                           step=state.step, seed=state.seed)


def load_state(path: Path, config: Optional[TrainConfig] = None) -> TrainState:
    """
    Restore a state written by save_state.

    Args:
        path: Checkpoint file
        config: Overrides the stored configuration (e.g. a different step
            count); network shapes must still match the stored tensors

    Raises:
        StorageError: On unreadable or incomplete checkpoints
        ConfigValidationError: When the stored configuration is invalid
    """
    ckpt = load_checkpoint(path)
    if config is None:
        try:
            config = TrainConfig.model_validate(ckpt.config)
        except PydanticValidationError as e:
            raise ConfigValidationError(f"checkpoint holds an invalid training config: {e}")

    state = init_state(config)
    try:
        state.generator.assign(ckpt.group("generator"))
        state.critic_local.assign(ckpt.group("critic_local"))
        state.critic_global.assign(ckpt.group("critic_global"))
        for prefix, opt in (("opt_g", state.opt_g), ("opt_dl", state.opt_dl), ("opt_dg", state.opt_dg)):
            opt.load_state(ckpt.group(f"{prefix}.acc_grad"), ckpt.group(f"{prefix}.acc_delta"))
    except ShapeMismatchError as e:
        raise StorageError(f"checkpoint does not match the network configuration: {e.message}", path=str(path))

    history = ckpt.groups.get("history", {})
    if history:
        frame = pd.DataFrame({col: history[col] for col in HISTORY_COLUMNS})
        frame["step"] = frame["step"].astype(int)
        state.history = frame.to_dict(orient="records")
    state.step = ckpt.step
    logger.info(f"Restored training state at step {state.step} from {path}")
    return state


def write_history(path: Path, state: TrainState) -> Path:
    """Write the loss history CSV (columns HISTORY_COLUMNS)."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        state.history_frame().to_csv(path, index=False)
    except OSError as e:
        raise StorageError(f"cannot write loss history: {e}", path=str(path))
    return path


# ============================================================================
# BATCHES
# ============================================================================

class PreparedSample(NamedTuple):
    """A corpus sample plus the per-sample inputs that never change during training."""

    sample: CompositeSample
    illum_map: np.ndarray
    Y_local: np.ndarray
    real_content: np.ndarray


def prepare_sample(sample: CompositeSample, config: TrainConfig) -> PreparedSample:
    """
    Precompute the critic illumination map and the real local pair.

    Raises:
        ShapeMismatchError: When the sample does not match the configured sizes
    """
    if (sample.image_size, sample.local_size) != (config.image_size, config.local_size):
        raise ShapeMismatchError(
            "sample sizes differ from the training configuration",
            shapes={"sample": (sample.image_size, sample.local_size),
                    "config": (config.image_size, config.local_size)}
        )
    if sample.gt_sh.degree != config.sh_degree:
        raise ShapeMismatchError(f"sample SH degree {sample.gt_sh.degree} != configured {config.sh_degree}")

    n = config.local_size
    if config.ablation.illumination:
        illum = illum_map_for_critic(sample.gt_sh, n).data
    else:
        illum = np.zeros((3, n, n))
    return PreparedSample(
        sample=sample,
        illum_map=illum,
        Y_local=extract_local(sample.Y, sample.region, n).data,
        real_content=sample.y * sample.m_f,
    )


def draw_batch(prepared: Sequence[PreparedSample], batch_size: int, seed: int, step: int) -> List[PreparedSample]:
    """Indices from default_rng([seed, step]); with replacement only for tiny corpora."""
    if not prepared:
        raise ValidationError("cannot draw a batch from an empty corpus")
    rng = np.random.default_rng([seed, step])
    idx = rng.choice(len(prepared), size=batch_size, replace=len(prepared) < batch_size)
    return [prepared[int(i)] for i in idx]


# ============================================================================
# STEP
# ============================================================================

def _harmonize(generator: ParamSet, config: TrainConfig, p: PreparedSample) -> Tensor:
    s = p.sample
    return generate(generator, s.X_local, s.x, s.gt_sh, s.m_f, s.fg_content, config.filter, config.ablation).x_h


def _harmonize_real(generator: ParamSet, config: TrainConfig, p: PreparedSample) -> Tensor:
    s = p.sample
    return generate(generator, p.Y_local, s.y, s.gt_sh, s.m_f, p.real_content, config.filter, config.ablation).x_h


def _zero() -> Tensor:
    return Tensor(np.array(0.0))


def train_step(state: TrainState, batch: Sequence[PreparedSample]) -> TrainState:
    """
    One alternating update (critics d_steps_per_g times, then the generator).

    Args:
        state: Training state, updated in place
        batch: Prepared samples

    Returns:
        The same state, one step further, with a new history row

    Raises:
        NonFiniteLossError: When a loss or an updated parameter is NaN or infinite
    """
    if not batch:
        raise ValidationError("train_step needs a non-empty batch")
    cfg = state.config
    weights = cfg.loss_weights
    use_global = cfg.ablation.spatial_transformer
    step = state.step
    critic_local, critic_global = state.critic_local, state.critic_global

    fakes = [_harmonize(state.generator, cfg, p).data for p in batch]
    fake_globals = ([inverse_warp_compose(p.sample.bg, f, p.sample.region) for p, f in zip(batch, fakes)]
                    if use_global else [])

    critic_tensors = critic_local.tensors() + (critic_global.tensors() if use_global else [])
    loss_d_l, loss_d_g = _zero(), _zero()
    for _ in range(weights.d_steps_per_g):
        with Tape() as tape:
            loss_d_l, _ = local_adv_losses(
                [discriminate_local(critic_local, f, p.illum_map) for p, f in zip(batch, fakes)],
                [discriminate_local(critic_local, p.sample.y, p.illum_map) for p in batch],
            )
            if use_global:
                loss_d_g, _ = global_adv_losses(
                    [discriminate_global(critic_global, img, mask) for img, mask in fake_globals],
                    [discriminate_global(critic_global, p.sample.Y, p.sample.m_Y) for p in batch],
                )
            _, loss_d = total_losses(LossParts(loss_d_l, _zero(), loss_d_g, _zero(), _zero()), weights, step)
        grads = tape.gradient(loss_d, critic_tensors)
        state.opt_dl.step(grads[:len(critic_local)])
        if use_global:
            state.opt_dg.step(grads[len(critic_local):])
        critic_local.clip(weights.clip_c)
        critic_global.clip(weights.clip_c)

    real_local = [discriminate_local(critic_local, p.sample.y, p.illum_map).item() for p in batch]
    real_global = [discriminate_global(critic_global, p.sample.Y, p.sample.m_Y).item() for p in batch] if use_global else []

    with Tape() as tape:
        fake_local, fake_global, identity = [], [], []
        for p in batch:
            x_h = _harmonize(state.generator, cfg, p)
            fake_local.append(discriminate_local(critic_local, x_h, p.illum_map))
            if use_global:
                global_img, global_mask = inverse_warp_compose(p.sample.bg, x_h, p.sample.region)
                fake_global.append(discriminate_global(critic_global, global_img, global_mask))
            identity.append(identity_loss(_harmonize_real(state.generator, cfg, p), p.sample.y))

        _, loss_g_l = local_adv_losses(fake_local, real_local)
        loss_g_g = global_adv_losses(fake_global, real_global)[1] if use_global else _zero()
        loss_s_idt = stack_mean(identity)
        parts = LossParts(loss_d_l, loss_g_l, loss_d_g, loss_g_g, loss_s_idt)
        loss_g, _ = total_losses(parts, weights, step)

    state.opt_g.step(tape.gradient(loss_g, state.generator.tensors()))
    if not state.generator.all_finite():
        logger.error(f"step {step}: generator parameters became non-finite")
        raise NonFiniteLossError(f"generator parameters became non-finite at step {step}", step=step,
                                 details={"losses": parts.values()})

    state.history.append({"step": step, **parts.values()})
    state.step = step + 1
    return state


# ============================================================================
# LOOP
# ============================================================================

def train(
    state: TrainState,
    prepared: Sequence[PreparedSample],
    steps: int,
    history_path: Optional[Path] = None
) -> TrainState:
    """
    Run `steps` further training steps.

    Args:
        state: Training state (fresh or restored)
        prepared: Prepared corpus
        steps: Number of steps to run
        history_path: Loss history CSV rewritten every log_every steps and at the end

    Returns:
        The updated state
    """
    cfg = state.config
    logger.info(f"Training from step {state.step} for {steps} steps on {len(prepared)} scenes")
    for _ in range(steps):
        batch = draw_batch(prepared, cfg.batch_size, cfg.seed, state.step)
        train_step(state, batch)
        if state.step % cfg.log_every == 0:
            row = state.history[-1]
            logger.info(
                f"step {state.step}: L_D_L={row['L_D_L']:.4f} L_G_L={row['L_G_L']:.4f} "
                f"L_D_G={row['L_D_G']:.4f} L_G_G={row['L_G_G']:.4f} L_S_idt={row['L_S_idt']:.4f}"
            )
            if history_path is not None:
                write_history(history_path, state)
    if history_path is not None:
        write_history(history_path, state)
    return state
