"""
Generator branches and WGAN critics.

Responsibilities:
- NetworkConfig / AblationConfig: architecture sizes and component switches
- Parameter initialization for the generator and both critics
- encode -> shadow_branch / texture_branch -> compose_local (local harmonization)
- discriminate_local / discriminate_global (critic scores)

Architecture (defaults, 64x64 global / 32x32 local images):
- Encoder: concat(X, x) [6] -> 3 stride-2 3x3 convs 8 -> 16 -> 32, ReLU
- Shadow decoder: concat(features, SH tile) [32 + M] -> 3 (upsample, conv)
  stages 16 -> 8 -> 3, ReLU between, tanh last
- Texture decoder: features [32] -> 3 (upsample, conv) stages 16 -> 8 -> 8 giving
  the style feature S; the foreground content is projected to 8 channels by a
  1x1 conv (C), guided-filtered against S, and mapped to RGB by a final 3x3 conv + tanh
- Critics: 4 stride-2 3x3 convs 8 -> 16 -> 32 -> 1, ReLU between, mean-pooled score

All layers carry a bias. Generator weights are He-normal from the seed with
zero biases; critic weights and biases are uniform in [-clip_c, clip_c].
"""

import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from illumcomp.core.ops import blend, conv2d, upsample2x
from illumcomp.core.tensor import ArrayLike, Tensor, add, as_tensor, concat, mean_all, relu, reshape, tanh
from illumcomp.filters.guided_filter import FilterConfig, guided_filter
from illumcomp.geometry.stm import Homography, warp
from illumcomp.illumination.sh import SHCoefficients, illum_features, sh_count
from illumcomp.models.params import ParamSet
from illumcomp.utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)


# ============================================================================
# CONFIGURATION
# ============================================================================

class NetworkConfig(BaseModel):
    """Architecture sizes."""

    model_config = ConfigDict(extra="forbid")

    encoder_channels: List[int] = Field(default=[8, 16, 32], min_length=1)
    decoder_channels: List[int] = Field(default=[16, 8], description="Hidden decoder stages")
    texture_channels: int = Field(default=8, ge=1, description="Guided-filter feature channels")
    critic_channels: List[int] = Field(default=[8, 16, 32, 1], min_length=1)
    kernel_size: int = Field(default=3, ge=1)
    sh_degree: int = Field(default=2, ge=0)

    @model_validator(mode="after")
    def _consistent(self) -> "NetworkConfig":
        if len(self.decoder_channels) + 1 != len(self.encoder_channels):
            raise ValueError("decoders need one stage per encoder stage (hidden stages + output stage)")
        if self.critic_channels[-1] != 1:
            raise ValueError("the last critic stage must have 1 channel")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if min(self.encoder_channels + self.decoder_channels + self.critic_channels) < 1:
            raise ValueError("channel counts must be positive")
        return self

    @property
    def illum_channels(self) -> int:
        """M = 3 * (L + 1)^2."""
        return 3 * sh_count(self.sh_degree)

    @property
    def downsample(self) -> int:
        return 2 ** len(self.encoder_channels)


class AblationConfig(BaseModel):
    """Component switches; all enabled reproduces the full model."""

    model_config = ConfigDict(extra="forbid")

    guided_filter: bool = Field(default=True, description="Content guidance in the texture branch")
    branched: bool = Field(default=True, description="Separate shadow and texture branches")
    spatial_transformer: bool = Field(default=True, description="Global harmonization and critic")
    illumination: bool = Field(default=True, description="SH conditioning and illumination map")


class GeneratorOutput(NamedTuple):
    x_h: Tensor
    x_s: Tensor
    x_t: Optional[Tensor]


# ============================================================================
# INITIALIZATION
# ============================================================================

def _conv_shapes(prefix: str, channels: List[int], c_in: int, k: int) -> List[Tuple[str, Tuple[int, ...]]]:
    shapes = []
    for i, c_out in enumerate(channels):
        shapes.append((f"{prefix}{i}.w", (c_out, c_in, k, k)))
        shapes.append((f"{prefix}{i}.b", (c_out,)))
        c_in = c_out
    return shapes


def generator_shapes(cfg: NetworkConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Ordered (name, shape) list of every generator parameter."""
    k = cfg.kernel_size
    bottleneck = cfg.encoder_channels[-1]
    shapes = _conv_shapes("enc", cfg.encoder_channels, 6, k)
    shapes += _conv_shapes("sd", cfg.decoder_channels + [3], bottleneck + cfg.illum_channels, k)
    shapes += _conv_shapes("td", cfg.decoder_channels + [cfg.texture_channels], bottleneck, k)
    shapes += [("proj.w", (cfg.texture_channels, 3, 1, 1)), ("proj.b", (cfg.texture_channels,))]
    shapes += [("tout.w", (3, cfg.texture_channels, k, k)), ("tout.b", (3,))]
    return shapes


def critic_shapes(cfg: NetworkConfig, in_channels: int) -> List[Tuple[str, Tuple[int, ...]]]:
    return _conv_shapes("c", cfg.critic_channels, in_channels, cfg.kernel_size)


def init_generator(cfg: NetworkConfig, seed: int) -> ParamSet:
    """He-normal weights, zero biases, deterministic in the seed."""
    rng = np.random.default_rng([seed, 0])
    arrays = {}
    for name, shape in generator_shapes(cfg):
        if name.endswith(".b"):
            arrays[name] = np.zeros(shape)
        else:
            fan_in = shape[1] * shape[2] * shape[3]
            arrays[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    params = ParamSet("generator", arrays)
    logger.debug(f"Initialized generator: {params.num_parameters()} parameters")
    return params


def init_critics(cfg: NetworkConfig, seed: int, clip_c: float) -> Tuple[ParamSet, ParamSet]:
    """Local (image + illumination map) and global (image + mask) critics."""
    rng = np.random.default_rng([seed, 1])
    local = {name: rng.uniform(-clip_c, clip_c, size=shape) for name, shape in critic_shapes(cfg, 6)}
    global_ = {name: rng.uniform(-clip_c, clip_c, size=shape) for name, shape in critic_shapes(cfg, 4)}
    return ParamSet("critic_local", local), ParamSet("critic_global", global_)


def zeros_like(params: ParamSet) -> ParamSet:
    return ParamSet(params.name, {k: np.zeros_like(v) for k, v in params.to_arrays().items()})


# ============================================================================
# LAYERS
# ============================================================================

def _conv(x: Tensor, params: ParamSet, name: str, stride: int = 1) -> Tensor:
    w, b = params[f"{name}.w"], params[f"{name}.b"]
    out = conv2d(x, w, stride=stride, pad=w.shape[-1] // 2)
    return add(out, reshape(b, (b.shape[0], 1, 1)))


def _decode(params: ParamSet, prefix: str, x: Tensor, stages: int, final_tanh: bool) -> Tensor:
    for i in range(stages):
        x = _conv(upsample2x(x), params, f"{prefix}{i}")
        x = tanh(x) if (final_tanh and i == stages - 1) else relu(x)
    return x


def _stage_count(params: ParamSet, prefix: str) -> int:
    count = 0
    while f"{prefix}{count}.w" in params:
        count += 1
    return count


def _check_image(name: str, t: Tensor, channels: int) -> None:
    if t.ndim != 3 or t.shape[0] != channels:
        raise ShapeMismatchError(f"{name} must be [{channels}, H, W]", shapes={name: t.shape})


# ============================================================================
# GENERATOR
# ============================================================================

def encode(params: ParamSet, background: ArrayLike, composite: ArrayLike) -> Tensor:
    """
    Shared encoder over the channel-concatenated (X, x) pair.

    Args:
        params: Generator parameters
        background: Local background X [3, h, w]
        composite: Direct composite x [3, h, w]

    Returns:
        Features [C_enc, h / 2^stages, w / 2^stages]

    Raises:
        ShapeMismatchError: When shapes differ or h, w are not divisible by 2^stages
    """
    background, composite = as_tensor(background), as_tensor(composite)
    _check_image("background", background, 3)
    _check_image("composite", composite, 3)
    if background.shape != composite.shape:
        raise ShapeMismatchError("encoder inputs differ in shape",
                                 shapes={"background": background.shape, "composite": composite.shape})
    stages = _stage_count(params, "enc")
    factor = 2 ** stages
    _, height, width = background.shape
    if height % factor or width % factor:
        raise ShapeMismatchError(
            f"encoder input size must be divisible by {factor}",
            shapes={"input": background.shape}
        )

    x = concat([background, composite], axis=0)
    for i in range(stages):
        x = relu(_conv(x, params, f"enc{i}", stride=2))
    return x


def shadow_branch(
    params: ParamSet,
    feats: Tensor,
    illum: ArrayLike,
    m_f: Optional[ArrayLike] = None
) -> Tensor:
    """
    Decode encoder features conditioned on tiled illumination features.

    Args:
        params: Generator parameters
        feats: Encoder output [C_enc, h', w']
        illum: Illumination features [M, h', w']
        m_f: Foreground mask [1, h, w]; only its size is checked here, the
            (1 - m_f) masking is applied by compose_local

    Returns:
        x_s [3, h, w] in [-1, 1]
    """
    illum = as_tensor(illum)
    if illum.ndim != 3 or illum.shape[1:] != feats.shape[1:]:
        raise ShapeMismatchError("illumination features must match the encoder grid",
                                 shapes={"feats": feats.shape, "illum": illum.shape})
    expected = params["sd0.w"].shape[1] - feats.shape[0]
    if illum.shape[0] != expected:
        raise ShapeMismatchError(f"expected {expected} illumination channels",
                                 shapes={"illum": illum.shape})

    stages = _stage_count(params, "sd")
    x_s = _decode(params, "sd", concat([feats, illum], axis=0), stages, final_tanh=True)
    if m_f is not None and as_tensor(m_f).shape[1:] != x_s.shape[1:]:
        raise ShapeMismatchError("m_f does not match the decoded size",
                                 shapes={"m_f": as_tensor(m_f).shape, "x_s": x_s.shape})
    return x_s


def project_content(params: ParamSet, fg_content: ArrayLike, height: int, width: int) -> Tensor:
    """Resample the foreground content to (height, width) and apply the 1x1 projection."""
    fg_content = as_tensor(fg_content)
    _check_image("fg_content", fg_content, 3)
    if fg_content.shape[1:] != (height, width):
        fg_content = warp(fg_content, Homography.identity(), height, width)
    return _conv(fg_content, params, "proj")


def texture_branch(
    params: ParamSet,
    feats: Tensor,
    fg_content: ArrayLike,
    cfg: FilterConfig,
    use_guided_filter: bool = True
) -> Tensor:
    """
    Decode a style feature and transfer it onto the foreground content.

    x_t = tanh(final_conv(guided_filter(C = projected content, S = style, cfg)))

    Args:
        params: Generator parameters
        feats: Encoder output
        fg_content: Foreground content [3, h', w'] (resampled when h', w' differ)
        cfg: Guided filter configuration
        use_guided_filter: False skips content guidance (final conv on S)

    Returns:
        x_t [3, h, w] in [-1, 1]
    """
    stages = _stage_count(params, "td")
    style = _decode(params, "td", feats, stages, final_tanh=False)
    if use_guided_filter:
        content = project_content(params, fg_content, style.shape[1], style.shape[2])
        filtered = guided_filter(content, style, cfg)
    else:
        filtered = style
    return tanh(_conv(filtered, params, "tout"))


def compose_local(x_s: ArrayLike, x_t: ArrayLike, m_f: ArrayLike) -> Tensor:
    """x_h = x_t * m_f + x_s * (1 - m_f)."""
    return blend(x_t, x_s, m_f)


def generate(
    params: ParamSet,
    background: ArrayLike,
    composite: ArrayLike,
    sh: SHCoefficients,
    m_f: ArrayLike,
    fg_content: ArrayLike,
    filter_cfg: FilterConfig,
    ablation: Optional[AblationConfig] = None
) -> GeneratorOutput:
    """
    Full local harmonization: encode, both branches, masked blend.

    Returns:
        GeneratorOutput(x_h, x_s, x_t); x_t is None when the branched
        switch is off (x_h = x_s)
    """
    ablation = ablation or AblationConfig()
    feats = encode(params, background, composite)
    illum = illum_features(sh, feats.shape[1], feats.shape[2])
    if not ablation.illumination:
        illum = Tensor(np.zeros(illum.shape))

    x_s = shadow_branch(params, feats, illum, m_f)
    if not ablation.branched:
        return GeneratorOutput(x_h=x_s, x_s=x_s, x_t=None)

    x_t = texture_branch(params, feats, fg_content, filter_cfg, use_guided_filter=ablation.guided_filter)
    return GeneratorOutput(x_h=compose_local(x_s, x_t, m_f), x_s=x_s, x_t=x_t)


# ============================================================================
# CRITICS
# ============================================================================

def _critic(params: ParamSet, x: Tensor) -> Tensor:
    stages = _stage_count(params, "c")
    expected = params["c0.w"].shape[1]
    if x.shape[0] != expected:
        raise ShapeMismatchError(f"critic expects {expected} input channels", shapes={"input": x.shape})
    for i in range(stages):
        x = _conv(x, params, f"c{i}", stride=2)
        if i < stages - 1:
            x = relu(x)
    return mean_all(x)


def discriminate_local(params: ParamSet, local_img: ArrayLike, illum_map: ArrayLike) -> Tensor:
    """
    Local critic score of an image paired with its illumination map.

    Args:
        params: Local critic parameters
        local_img: Local image [3, n, n]
        illum_map: Illumination map area-resampled to [3, n, n]

    Returns:
        Scalar score (unbounded)
    """
    local_img, illum_map = as_tensor(local_img), as_tensor(illum_map)
    _check_image("local_img", local_img, 3)
    if illum_map.shape != local_img.shape:
        raise ShapeMismatchError("illumination map must match the local image",
                                 shapes={"local_img": local_img.shape, "illum_map": illum_map.shape})
    return _critic(params, concat([local_img, illum_map], axis=0))


def discriminate_global(params: ParamSet, global_img: ArrayLike, embed_mask: ArrayLike) -> Tensor:
    """Global critic score of an image paired with its embedding mask [1, N, N]."""
    global_img, embed_mask = as_tensor(global_img), as_tensor(embed_mask)
    _check_image("global_img", global_img, 3)
    if embed_mask.shape != (1,) + global_img.shape[1:]:
        raise ShapeMismatchError("embedding mask must be [1, N, N] matching the image",
                                 shapes={"global_img": global_img.shape, "embed_mask": embed_mask.shape})
    return _critic(params, concat([global_img, embed_mask], axis=0))
