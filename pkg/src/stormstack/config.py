"""Run configuration: defaults, `key=value` config files, and flag
overrides.

Keys are sectioned by prefix: `data.` for generation/featurization,
`kalman.` for smoothing, `model.` for the architecture, `train.` for
the optimizer.  The bare `seed` seeds everything (generation,
balancing, splitting, initialization, and batch shuffling).  The fully
resolved configuration is echoed to the run log so a run can be
reproduced from it alone.
"""

from dataclasses import dataclass, replace

from .errors import ParseError, UsageError
from .model import ModelConfig
from .synthetic import SyntheticConfig
from .training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    out_dir: str = "runs"
    threshold: float = 45.0
    fractions: tuple = (0.8, 0.1, 0.1)
    samples_per_class: int = 500
    steps: int = 12
    grid: tuple = (8, 8, 4)
    cell: tuple = (3, 3, 2)
    base_dbz: tuple = (20.0, 18.0, 14.0)
    peak_dbz: tuple = (55.0, 48.0, 35.0)
    rho: float = 0.85
    sigma: float = 5.0
    kalman_q: float = 0.01
    kalman_r: float = 1.0
    conv_layers: tuple = ((32, 3), (32, 3))
    lstm_hidden: int = 64
    attention_heads: int = 4
    attention_dim: int = 0  # 0 = recurrent width / heads
    conv_padding: str = "valid"
    recurrent: str = "bilstm"
    attention: bool = True
    knn_k: int = 5
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def synthetic_config(self) -> SyntheticConfig:
        return SyntheticConfig(
            samples_per_class=self.samples_per_class,
            steps=self.steps,
            grid=self.grid,
            cell=self.cell,
            base_dbz=self.base_dbz,
            peak_dbz=self.peak_dbz,
            rho=self.rho,
            sigma=self.sigma,
            seed=self.seed,
        )

    def model_config(self, steps, input_channels, recurrent=None, attention=None) -> ModelConfig:
        """Architecture for the given data shape.

        recurrent/attention override the configured values so baseline
        variants (plain lstm, rnn, attention off) reuse the rest of the
        settings.  attention_dim=0 derives the head width from the
        recurrent output so heads always tile it exactly.
        """
        recurrent = self.recurrent if recurrent is None else recurrent
        attention = self.attention if attention is None else attention
        width = 2 * self.lstm_hidden if recurrent == "bilstm" else self.lstm_hidden
        head_dim = self.attention_dim
        if attention and head_dim == 0:
            if width % self.attention_heads != 0:
                raise UsageError(
                    f"attention_heads={self.attention_heads} does not divide the"
                    f" recurrent width {width}; set model.head_dim explicitly"
                )
            head_dim = width // self.attention_heads
        return ModelConfig(
            steps=steps,
            input_channels=input_channels,
            conv_layers=self.conv_layers,
            lstm_hidden=self.lstm_hidden,
            attention_heads=self.attention_heads,
            attention_dim=head_dim,
            conv_padding=self.conv_padding,
            recurrent=recurrent,
            attention=attention,
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            seed=self.seed,
        )


def _parse_bool(text):
    if text not in ("true", "false"):
        raise ValueError(f"expected true or false, got {text!r}")
    return text == "true"


def _parse_dims(text):
    return tuple(int(p) for p in text.split("x"))


def _parse_floats(text):
    return tuple(float(p) for p in text.split(","))


def _parse_fractions(text):
    return tuple(float(p) for p in text.split(","))


def _parse_conv(text):
    if not text:
        return ()
    layers = []
    for part in text.split(","):
        f, _, k = part.partition("x")
        layers.append((int(f), int(k)))
    return tuple(layers)


def _render_conv(layers):
    return ",".join(f"{f}x{k}" for f, k in layers)


def _render_dims(dims):
    return "x".join(str(d) for d in dims)


def _render_floats(values):
    return ",".join(repr(v) for v in values)


# key -> (RunConfig field, parse, render)
_KEYS = {
    "seed": ("seed", int, str),
    "data.out_dir": ("out_dir", str, str),
    "data.threshold": ("threshold", float, repr),
    "data.fractions": ("fractions", _parse_fractions, _render_floats),
    "data.samples_per_class": ("samples_per_class", int, str),
    "data.steps": ("steps", int, str),
    "data.grid": ("grid", _parse_dims, _render_dims),
    "data.cell": ("cell", _parse_dims, _render_dims),
    "data.base_dbz": ("base_dbz", _parse_floats, _render_floats),
    "data.peak_dbz": ("peak_dbz", _parse_floats, _render_floats),
    "data.rho": ("rho", float, repr),
    "data.sigma": ("sigma", float, repr),
    "kalman.q": ("kalman_q", float, repr),
    "kalman.r": ("kalman_r", float, repr),
    "model.conv": ("conv_layers", _parse_conv, _render_conv),
    "model.hidden": ("lstm_hidden", int, str),
    "model.heads": ("attention_heads", int, str),
    "model.head_dim": ("attention_dim", int, str),
    "model.padding": ("conv_padding", str, str),
    "model.recurrent": ("recurrent", str, str),
    "model.attention": ("attention", _parse_bool, lambda v: "true" if v else "false"),
    "model.knn_k": ("knn_k", int, str),
    "train.learning_rate": ("learning_rate", float, repr),
    "train.batch_size": ("batch_size", int, str),
    "train.max_epochs": ("max_epochs", int, str),
    "train.patience": ("patience", int, str),
    "train.beta1": ("beta1", float, repr),
    "train.beta2": ("beta2", float, repr),
    "train.epsilon": ("epsilon", float, repr),
}


def parse_config_file(path) -> dict:
    """Read `key=value` lines; `#` starts a comment, blanks are skipped.

    Returns {RunConfig field: parsed value}; unknown keys and
    malformed values fail loudly.
    """
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, text = line.partition("=")
        key = key.strip()
        text = text.strip()
        if key not in _KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        field, parse, _ = _KEYS[key]
        try:
            values[field] = parse(text)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def resolve(config_path=None, seed=None, out_dir=None) -> RunConfig:
    """Defaults, then the config file, then flag overrides."""
    cfg = RunConfig()
    if config_path is not None:
        cfg = replace(cfg, **parse_config_file(config_path))
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=out_dir)
    return cfg


def resolved_lines(cfg: RunConfig):
    """The full configuration as `key=value` lines, one per key, in a
    fixed order; parsing them back reproduces cfg exactly."""
    lines = []
    for key, (field, _, render) in _KEYS.items():
        lines.append(f"{key}={render(getattr(cfg, field))}")
    return lines
