"""Pipeline configuration and its ``key=value`` file format.

Every constant the method leaves open lives here with a documented default.
A config file holds one ``key=value`` per line; blank lines and lines starting
with ``#`` are ignored.  Floats are written with ``repr`` so a dump parses back
to the identical value.
"""

from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from pathlib import Path

from ksora.errors import ConfigurationError
from ksora.kos import EnhanceRanges, KOSParams


def _opt(default, doc):
    return field(default=default, metadata={"doc": doc})


@dataclass(frozen=True)
class PipelineConfig:
    tau: float = _opt(0.5, "saliency threshold for counting box pixels, in (0, 1)")
    normalize_conf: bool = _opt(False, "divide box pixel counts by box area")
    kappa_in: str = _opt("auto", "roi input range 'lo,hi' in [0,255], or 'auto' for a percentile stretch")
    kappa_pct_lo: float = _opt(2.0, "lower percentile of the auto input range")
    kappa_pct_hi: float = _opt(98.0, "upper percentile of the auto input range")
    kappa_out_lo: float = _opt(0.0, "roi output range lower bound")
    kappa_out_hi: float = _opt(255.0, "roi output range upper bound")
    prior_sigma_x: float = _opt(1.0 / 3.0, "centre-prior Gaussian sigma as a fraction of frame width")
    prior_sigma_y: float = _opt(1.0 / 3.0, "centre-prior Gaussian sigma as a fraction of frame height")
    seed: int = _opt(0, "root seed for extractor, weighting, convLSTM and dropout parameters")
    feat_channels: int = _opt(8, "channels of every extractor tap (shared by both pyramid levels)")
    extractor_depth: int = _opt(2, "conv layers per resolution level in each toy extractor")
    obj_tap_fine: int = _opt(2, "object extractor layer feeding the fine pyramid level (1..depth)")
    obj_tap_coarse: int = _opt(4, "object extractor layer feeding the coarse level (depth+1..2*depth)")
    flow_tap_fine: int = _opt(2, "motion extractor layer feeding the fine pyramid level (1..depth)")
    flow_tap_coarse: int = _opt(4, "motion extractor layer feeding the coarse level (depth+1..2*depth)")
    wfe_init_scale: float = _opt(0.5, "std-dev of the weighting conv kernels")
    lstm_hidden: int = _opt(8, "hidden channels of both convLSTM layers")
    lstm_init_scale: float = _opt(0.2, "std-dev of convLSTM parameters")
    dropout: float = _opt(0.2, "dropout rate on each convLSTM layer input, in [0, 1)")
    train: bool = _opt(False, "apply dropout masks (train mode); eval mode applies none")
    emd_mode: str = _opt("downsampled", "EMD granularity: 'exact' (<=16x16 maps) or 'downsampled'")
    pr_thresholds: int = _opt(21, "number of PR thresholds spread evenly over [0, 1]")
    auc_negatives: str = _opt("all", "AUC-Judd false-positive base: 'all' pixels or 'nonfixated'")

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigurationError(f"tau={self.tau} outside (0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout={self.dropout} outside [0, 1)")
        for name in ("feat_channels", "extractor_depth", "lstm_hidden"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        d = self.extractor_depth
        for name in ("obj_tap_fine", "flow_tap_fine"):
            if not 1 <= getattr(self, name) <= d:
                raise ConfigurationError(f"{name}={getattr(self, name)} outside 1..{d}")
        for name in ("obj_tap_coarse", "flow_tap_coarse"):
            if not d < getattr(self, name) <= 2 * d:
                raise ConfigurationError(f"{name}={getattr(self, name)} outside {d + 1}..{2 * d}")
        if self.emd_mode not in ("exact", "downsampled"):
            raise ConfigurationError(f"emd_mode={self.emd_mode!r}")
        if self.auc_negatives not in ("all", "nonfixated"):
            raise ConfigurationError(f"auc_negatives={self.auc_negatives!r}")
        if self.pr_thresholds < 2:
            raise ConfigurationError("pr_thresholds must be at least 2")
        self.kos_params()

    def enhance_ranges(self):
        if self.kappa_in == "auto":
            return None
        try:
            lo, hi = (float(v) for v in self.kappa_in.split(","))
        except ValueError:
            raise ConfigurationError(f"kappa_in={self.kappa_in!r}: expected 'auto' or 'lo,hi'") from None
        return EnhanceRanges(lo, hi, self.kappa_out_lo, self.kappa_out_hi)

    def kos_params(self):
        # EnhanceRanges validates the output pair even on the auto path.
        EnhanceRanges(0.0, 255.0, self.kappa_out_lo, self.kappa_out_hi)
        return KOSParams(
            tau=self.tau,
            normalize=self.normalize_conf,
            ranges=self.enhance_ranges(),
            pct_lo=self.kappa_pct_lo,
            pct_hi=self.kappa_pct_hi,
            out_lo=self.kappa_out_lo,
            out_hi=self.kappa_out_hi,
            sigma_x_frac=self.prior_sigma_x,
            sigma_y_frac=self.prior_sigma_y,
        )

    def with_overrides(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def config_help():
    """One line per option, for ``--help`` and the README."""
    lines = []
    for f in fields(PipelineConfig):
        default = f.default if f.default is not MISSING else None
        lines.append(f"  {f.name} = {_format(default)}\n      {f.metadata['doc']}")
    return "\n".join(lines)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(f, raw, where):
    kind = f.type
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(f"expected true/false, got {raw!r}")
            return low == "true"
        return kind(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{where}: {f.name}: {exc}") from None


def dumps_config(cfg):
    return "".join(f"{k}={_format(v)}\n" for k, v in asdict(cfg).items())


def loads_config(text, source="<config>"):
    by_name = {f.name: f for f in fields(PipelineConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if "=" not in stripped:
            raise ConfigurationError(f"{where}: expected key=value, got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in by_name:
            raise ConfigurationError(f"{where}: unknown key {key!r}")
        values[key] = _parse(by_name[key], raw, where)
    return PipelineConfig(**values)


def read_config(path):
    return loads_config(Path(path).read_text(encoding="utf-8"), str(path))


def write_config(path, cfg):
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")
