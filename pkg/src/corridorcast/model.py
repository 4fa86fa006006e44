"""The corridor forecaster: windowing, baselines, DAE pretraining, training.

The trainable model stacks, in order: a multi-kernel convolution over
residual windows (one kernel per sensor cluster, sliding over time only),
a dense re-projection of the concatenated cluster features onto a
(window, sensors, channels) grid, concatenation of a densely re-projected
trend channel, two convolution-LSTM layers over the window axis, a dense
head joined with the known seasonal slice of the prediction span, and
optionally one denoising-autoencoder head per cluster whose outputs are
resolved by a shared linear target layer (so sensors belonging to several
clusters receive a combined forecast).

Inputs are stationarized: seasonal and trend windows have their value at
the last input step subtracted, residuals pass through, and forecasts are
recovered by adding the anchors back before inverting the scaling.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from . import nn
from .decompose import Decomposition, recover_forecast, stationarize_window
from .errors import ConfigError, InsufficientDataError, TrainingDivergence
from .nn import Tensor
from .panel import Panel, ScalingParams


@dataclass(frozen=True)
class ForecasterConfig:
    """Architecture and training knobs.

    Defaults are the full-scale reference setting; `desk()` returns the
    scaled-down configuration meant for laptop-sized experiments.
    """

    window: int = 6
    horizon: int = 4
    conv_filters: tuple[int, int] = (32, 64)
    conv_time_kernel: int = 3
    conv_pool: int = 2
    proj_channels: int = 8
    convlstm_filters: tuple[int, int] = (16, 32)
    convlstm_kernel: int = 3
    post_units: int = 256
    dae_widths: tuple[int, ...] = (40, 20, 10, 20, 40)
    dropout: float = 0.2
    batch_size: int = 512
    epochs: int = 400
    pretrain_epochs: int = 60
    learning_rate: float = 1e-3
    use_dae: bool = True

    def __post_init__(self):
        numbers = (self.window, self.horizon, *self.conv_filters, self.conv_time_kernel,
                   self.conv_pool, self.proj_channels, *self.convlstm_filters,
                   self.convlstm_kernel, self.post_units, *self.dae_widths,
                   self.batch_size, self.epochs, self.pretrain_epochs)
        if any(v <= 0 for v in numbers) or self.learning_rate <= 0:
            raise ConfigError("all size and rate settings must be positive")
        if tuple(self.dae_widths) != tuple(reversed(self.dae_widths)):
            raise ConfigError(f"dae widths must be palindromic, got {self.dae_widths}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

    @classmethod
    def desk(cls, **overrides) -> "ForecasterConfig":
        base = dict(conv_filters=(8, 16), proj_channels=4, convlstm_filters=(4, 8),
                    post_units=128, dae_widths=(16, 8, 4, 8, 16), batch_size=64,
                    epochs=25, pretrain_epochs=20, learning_rate=3e-3)
        base.update(overrides)
        return cls(**base)

    def to_items(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                out[f.name] = ",".join(str(x) for x in v)
            else:
                out[f.name] = str(v)
        return out

    @classmethod
    def from_items(cls, items: dict[str, str]) -> "ForecasterConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(items) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, raw in items.items():
            default = cls.__dataclass_fields__[name].default
            if isinstance(default, tuple):
                kwargs[name] = tuple(int(x) for x in raw.split(","))
            elif isinstance(default, bool):
                if raw not in ("true", "false", "True", "False", "0", "1"):
                    raise ConfigError(f"bad boolean for {name}: {raw!r}")
                kwargs[name] = raw in ("true", "True", "1")
            elif isinstance(default, int):
                kwargs[name] = int(raw)
            else:
                kwargs[name] = float(raw)
        return cls(**kwargs)

    def hash(self) -> str:
        text = ";".join(f"{k}={v}" for k, v in sorted(self.to_items().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


# -- windowing -----------------------------------------------------------------


@dataclass
class WindowSample:
    """One training/evaluation sample anchored at input step `t`."""

    residual_in: np.ndarray   # (s, w, k)
    trend_in: np.ndarray      # (s, w, k), anchored to zero at the last input step
    seasonal_in: np.ndarray   # (s, w+h, k), anchored likewise
    target: np.ndarray        # (s, h) stationarized scaled flow
    anchor_seasonal: np.ndarray  # (s,)
    anchor_trend: np.ndarray     # (s,)
    t: int


class WindowSet:
    """All stride-1 windows of a decomposed, scaled panel, stacked as arrays."""

    def __init__(self, residual_in, trend_in, seasonal_in, target_st, target_scaled,
                 anchor_seasonal, anchor_trend, t_index):
        self.residual_in = residual_in
        self.trend_in = trend_in
        self.seasonal_in = seasonal_in
        self.target_st = target_st
        self.target_scaled = target_scaled
        self.anchor_seasonal = anchor_seasonal
        self.anchor_trend = anchor_trend
        self.t_index = t_index

    def __len__(self) -> int:
        return self.residual_in.shape[0]

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx)
        return WindowSet(self.residual_in[idx], self.trend_in[idx], self.seasonal_in[idx],
                         self.target_st[idx], self.target_scaled[idx],
                         self.anchor_seasonal[idx], self.anchor_trend[idx],
                         self.t_index[idx])

    def sample(self, i: int) -> WindowSample:
        return WindowSample(self.residual_in[i], self.trend_in[i], self.seasonal_in[i],
                            self.target_st[i], self.anchor_seasonal[i],
                            self.anchor_trend[i], int(self.t_index[i]))

    def batch_dict(self, idx=None) -> dict[str, np.ndarray]:
        if idx is None:
            return {"residual": self.residual_in, "trend": self.trend_in,
                    "seasonal": self.seasonal_in}
        idx = np.asarray(idx)
        return {"residual": self.residual_in[idx], "trend": self.trend_in[idx],
                "seasonal": self.seasonal_in[idx]}


def make_windows(panel: Panel, decomp: Decomposition, w: int, h: int,
                 out_feature: int = 0) -> WindowSet:
    """Slide a (w input + h horizon) window over the panel with stride 1.

    The panel and decomposition are expected in scaled space; targets are the
    horizon flow values minus the anchor seasonal + trend at the last input
    step.
    """
    n, t, k = panel.values.shape
    if t < w + h:
        raise InsufficientDataError(f"{t} steps cannot fit a window of {w}+{h}")
    count = t - w - h + 1
    swv = np.lib.stride_tricks.sliding_window_view

    def spans(block: np.ndarray, length: int) -> np.ndarray:
        # (n, t, k) -> (count, n, length, k) windows starting at 0..count-1
        win = swv(block, length, axis=1)            # (n, t-length+1, k, length)
        win = win[:, :count].transpose(1, 0, 3, 2)  # (count, n, length, k)
        return np.ascontiguousarray(win, dtype=np.float64)

    s_win = spans(decomp.seasonal, w + h)
    t_win = spans(decomp.trend, w + h)
    r_win = spans(decomp.residual, w + h)
    seasonal_in, trend_in, residual_in, (anchor_s, anchor_t) = stationarize_window(
        s_win, t_win, r_win, anchor_index=w - 1, time_axis=2)

    target_scaled = spans(panel.values, w + h)[:, :, w:, out_feature]
    anchor_s = anchor_s[:, :, out_feature]
    anchor_t = anchor_t[:, :, out_feature]
    target_st = target_scaled - (anchor_s + anchor_t)[:, :, None]
    t_index = np.arange(w - 1, w - 1 + count)
    return WindowSet(residual_in[:, :, :w, :], trend_in[:, :, :w, :], seasonal_in,
                     target_st, target_scaled, anchor_s, anchor_t, t_index)


def split_by_time(windows: WindowSet, boundary_step: int, horizon: int
                  ) -> tuple[WindowSet, WindowSet]:
    """Train/test split on the anchor step; training targets stay before the boundary."""
    train_idx = np.flatnonzero(windows.t_index + horizon < boundary_step)
    test_idx = np.flatnonzero(windows.t_index >= boundary_step)
    return windows.subset(train_idx), windows.subset(test_idx)


def recover_predictions(pred_st: np.ndarray, windows: WindowSet,
                        scaling: ScalingParams, out_feature: int = 0) -> np.ndarray:
    """Stationarized scaled forecasts -> original units (N, sensors, horizon)."""
    scaled = recover_forecast(pred_st, (windows.anchor_seasonal, windows.anchor_trend),
                              horizon_axis=-1)
    lo = scaling.lo[:, out_feature][None, :, None]
    hi = scaling.hi[:, out_feature][None, :, None]
    degen = scaling.degenerate[:, out_feature][None, :, None]
    span = np.where(degen, 1.0, hi - lo)
    return np.where(degen, lo, scaled * span + lo)


def horizon_truth(panel: Panel, t_indices: np.ndarray, horizon: int,
                  feature: int = 0) -> np.ndarray:
    """Ground-truth horizon blocks (N, sensors, horizon) from an original-unit panel."""
    offsets = np.arange(1, horizon + 1)
    steps = np.asarray(t_indices)[:, None] + offsets[None, :]
    return panel.values[:, steps, feature].transpose(1, 0, 2)


# -- baselines ---------------------------------------------------------------------


def baseline_current(panel: Panel, t_indices: np.ndarray, horizon: int,
                     feature: int = 0) -> np.ndarray:
    """Repeat the value at the anchor step across the whole horizon."""
    now = panel.values[:, np.asarray(t_indices), feature].T  # (N, s)
    return np.repeat(now[:, :, None], horizon, axis=2)


class WeekdayHourlyBaseline:
    """Timetable forecaster: training-mean flow per (sensor, weekday, slot)."""

    def __init__(self, train_panel: Panel, feature: int = 0):
        self.feature = feature
        self.step_minutes = train_panel.step_minutes
        seconds = train_panel.time_index.astype("datetime64[s]").astype(np.int64)
        weekday = ((seconds // 86400) + 3) % 7
        slot = (seconds % 86400) // int(self.step_minutes * 60)
        n = train_panel.n_sensors
        sums: dict[tuple[int, int, int], float] = {}
        counts: dict[tuple[int, int, int], int] = {}
        vals = train_panel.values[:, :, feature]
        obs = train_panel.missing_mask[:, :, feature]
        for si in range(n):
            for ti in range(train_panel.n_steps):
                if not obs[si, ti]:
                    continue
                key = (si, int(weekday[ti]), int(slot[ti]))
                sums[key] = sums.get(key, 0.0) + vals[si, ti]
                counts[key] = counts.get(key, 0) + 1
        self.table = {k: sums[k] / counts[k] for k in sums}
        totals = np.where(obs, vals, 0.0).sum(axis=1)
        seen = obs.sum(axis=1)
        self.global_mean = np.where(seen > 0, totals / np.maximum(seen, 1), 0.0)

    def predict_step(self, sensor: int, timestamp: np.datetime64) -> float:
        seconds = int(np.datetime64(timestamp, "s").astype(np.int64))
        key = (sensor, int(((seconds // 86400) + 3) % 7),
               int((seconds % 86400) // int(self.step_minutes * 60)))
        return self.table.get(key, float(self.global_mean[sensor]))

    def predict(self, panel: Panel, t_indices: np.ndarray, horizon: int) -> np.ndarray:
        out = np.empty((len(t_indices), panel.n_sensors, horizon))
        for i, t in enumerate(np.asarray(t_indices)):
            for j in range(horizon):
                ts = panel.time_index[t + 1 + j]
                for si in range(panel.n_sensors):
                    out[i, si, j] = self.predict_step(si, ts)
        return out


def baseline_weekday_hourly(train_panel: Panel, feature: int = 0) -> WeekdayHourlyBaseline:
    return WeekdayHourlyBaseline(train_panel, feature)


# -- denoising autoencoder heads ---------------------------------------------------


def scale_dae_widths(widths: tuple[int, ...], in_dim: int) -> tuple[int, ...]:
    """Shrink the widths proportionally when the input is smaller than the bottleneck.

    All widths are scaled by in_dim / (2 * bottleneck), which lands the new
    bottleneck near in_dim / 2 so the autoencoder stays undercomplete.
    """
    bottleneck = min(widths)
    if in_dim >= bottleneck:
        return tuple(widths)
    factor = in_dim / (2.0 * bottleneck)
    return tuple(max(1, int(round(w * factor))) for w in widths)


class DAEHead(nn.Layer):
    """Denoising autoencoder over one cluster's flattened output block.

    Hidden layers are ReLU with dropout corruption in between while
    training; the reconstruction layer is linear.
    """

    def __init__(self, rng: np.random.Generator, in_dim: int, widths: tuple[int, ...],
                 dropout_rate: float):
        super().__init__()
        self.in_dim = in_dim
        self.widths = scale_dae_widths(widths, in_dim)
        self.dropout = nn.Dropout(dropout_rate)
        self.dense: list[nn.Dense] = []
        dims = [in_dim, *self.widths, in_dim]
        for li, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            act = "identity" if li == len(dims) - 2 else "relu"
            layer = nn.Dense(rng, a, b, activation=act)
            self.dense.append(layer)
            for pname, p in layer.parameters().items():
                self._params[f"l{li}.{pname}"] = p

    def __call__(self, x: Tensor, training: bool, rng=None) -> Tensor:
        h = x
        for li, layer in enumerate(self.dense):
            if li > 0:
                h = self.dropout(h, training, rng)
            h = layer(h)
        return h


def pretrain_dae(cluster_blocks: list[np.ndarray], config: ForecasterConfig, seed: int,
                 log=None) -> tuple[list[dict[str, np.ndarray]], list[list[float]]]:
    """Train one DAE per cluster to reconstruct its clean output blocks.

    `cluster_blocks[j]` is (samples, dim_j).  Corruption comes from the
    dropout layers between the dense layers; the reconstruction target is the
    uncorrupted block.  Returns the trained weights per cluster (ready to be
    loaded into the forecaster's DAE heads) and the per-epoch reconstruction
    loss curves.
    """
    out: list[dict[str, np.ndarray]] = []
    curves: list[list[float]] = []
    for j, block in enumerate(cluster_blocks):
        rng = np.random.default_rng(np.random.SeedSequence((seed, j)))
        n, dim = block.shape
        head = DAEHead(rng, dim, config.dae_widths, config.dropout)
        if head.widths != tuple(config.dae_widths) and log is not None:
            log(f"cluster {j}: dae widths scaled to {head.widths} for dim {dim}")
        adam = nn.Adam(head.parameters(), lr=config.learning_rate)
        batch = min(config.batch_size, n)
        losses: list[float] = []
        for _ in range(config.pretrain_epochs):
            order = rng.permutation(n)
            total, seen = 0.0, 0
            for lo in range(0, n, batch):
                idx = order[lo:lo + batch]
                x = Tensor(block[idx])
                recon = head(x, training=True, rng=rng)
                loss = nn.mean(nn.square(recon - Tensor(block[idx])))
                adam.zero_grad()
                loss.backward()
                adam.step()
                total += float(loss.data) * len(idx)
                seen += len(idx)
            losses.append(total / seen)
        curves.append(losses)
        out.append({k: p.data.copy() for k, p in head.parameters().items()})
    return out, curves


# -- the forecaster ------------------------------------------------------------------


class Forecaster:
    """Cluster-aware convolution-LSTM forecaster with optional DAE heads."""

    def __init__(self, clusters: list[list[int]], n_sensors: int, n_features: int,
                 config: ForecasterConfig, seed: int,
                 pretrained_dae: list[dict[str, np.ndarray]] | None = None):
        if any(len(c) == 0 for c in clusters):
            raise ConfigError("cluster with zero members")
        if any(u < 0 or u >= n_sensors for c in clusters for u in c):
            raise ConfigError("cluster member index out of range")
        covered = {u for c in clusters for u in c}
        if covered != set(range(n_sensors)):
            raise ConfigError("clusters must cover every sensor")
        self.clusters = [list(c) for c in clusters]
        self.n_sensors = n_sensors
        self.n_features = n_features
        self.config = config
        self.seed = seed
        self.rng_seed = seed
        cfg = config
        w, h = cfg.window, cfg.horizon
        f1, f2 = cfg.conv_filters
        l1, l2 = cfg.convlstm_filters
        v = cfg.proj_channels

        t1 = w - cfg.conv_time_kernel + 1
        if t1 <= 0:
            raise ConfigError("conv time kernel exceeds the input window")
        if t1 % cfg.conv_pool != 0:
            raise ConfigError(f"pooled conv length {t1} not divisible by {cfg.conv_pool}")
        t_pooled = t1 // cfg.conv_pool
        conv2_kernel = min(2, t_pooled)
        t2 = t_pooled - conv2_kernel + 1

        rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
        self._params: dict[str, Tensor] = {}
        self.layers: list[tuple[str, dict]] = []

        self.mkconv = nn.MultiKernelConv(rng, self.clusters, cfg.conv_time_kernel,
                                         n_features, f1)
        self._adopt("mk", self.mkconv)
        self.layers.append(("multikernel_conv", {"clusters": len(clusters),
                                                 "filters": f1,
                                                 "time_kernel": cfg.conv_time_kernel}))
        self.cluster_conv2 = []
        for j in range(len(clusters)):
            conv = nn.Conv2d(rng, 1, conv2_kernel, f1, f2, activation="relu")
            self.cluster_conv2.append(conv)
            self._adopt(f"conv2.{j}", conv)
        self.layers.append(("cluster_conv2", {"filters": f2, "time_kernel": conv2_kernel}))

        concat_dim = len(clusters) * t2 * f2
        self.proj = nn.Dense(rng, concat_dim, w * n_sensors * v, activation="relu")
        self._adopt("proj", self.proj)
        self.trend_proj = nn.Dense(rng, n_sensors * w * n_features, w * n_sensors * v,
                                   activation="relu")
        self._adopt("trend", self.trend_proj)
        self.layers.append(("grid_projection", {"grid": (w, n_sensors, v, 2)}))

        self.lstm1 = nn.ConvLSTMCell(rng, (n_sensors, v), 2, l1, cfg.convlstm_kernel)
        self._adopt("lstm1", self.lstm1)
        self.lstm2 = nn.ConvLSTMCell(rng, (n_sensors, v), l1, l2, cfg.convlstm_kernel)
        self._adopt("lstm2", self.lstm2)
        self.layers.append(("convlstm", {"filters": (l1, l2), "kernel": cfg.convlstm_kernel}))

        self.post = nn.Dense(rng, n_sensors * v * l2, cfg.post_units, activation="relu")
        self._adopt("post", self.post)
        head_in = cfg.post_units + n_sensors * (w + h)
        self.head = nn.Dense(rng, head_in, n_sensors * h, activation="identity")
        self._adopt("head", self.head)
        self.layers.append(("seasonal_head", {"units": cfg.post_units}))

        self.use_dae = cfg.use_dae
        self.dae_heads: list[DAEHead] = []
        if self.use_dae:
            for j, members in enumerate(self.clusters):
                head = DAEHead(rng, len(members) * h, cfg.dae_widths, cfg.dropout)
                self.dae_heads.append(head)
                self._adopt(f"dae{j}", head)
            total = sum(len(m) * h for m in self.clusters)
            self.fct = nn.Dense(rng, total, n_sensors * h, activation="identity")
            self._adopt("fct", self.fct)
            self.layers.append(("dae_target", {"heads": len(clusters)}))
            if pretrained_dae is not None:
                self.load_dae_weights(pretrained_dae)

    def _adopt(self, prefix: str, layer: nn.Layer) -> None:
        for name, p in layer.parameters().items():
            self._params[f"{prefix}.{name}"] = p

    def parameters(self) -> dict[str, Tensor]:
        return dict(self._params)

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def load_dae_weights(self, pretrained: list[dict[str, np.ndarray]]) -> None:
        if len(pretrained) != len(self.dae_heads):
            raise ConfigError(f"{len(pretrained)} pretrained DAEs for "
                              f"{len(self.dae_heads)} heads")
        for head, weights in zip(self.dae_heads, pretrained):
            params = head.parameters()
            if set(weights) != set(params):
                raise ConfigError("pretrained DAE parameter names do not match")
            for name, arr in weights.items():
                if params[name].data.shape != arr.shape:
                    raise ConfigError(f"pretrained DAE shape mismatch on {name}")
                params[name].data = arr.copy()

    # -- forward -----------------------------------------------------------------

    def _check_batch(self, batch: dict[str, np.ndarray]) -> None:
        cfg = self.config
        s, w, h, k = self.n_sensors, cfg.window, cfg.horizon, self.n_features
        if batch["residual"].shape[1:] != (s, w, k):
            raise ConfigError(f"residual input must be (B,{s},{w},{k})")
        if batch["trend"].shape[1:] != (s, w, k):
            raise ConfigError(f"trend input must be (B,{s},{w},{k})")
        if batch["seasonal"].shape[1:] != (s, w + h, k):
            raise ConfigError(f"seasonal input must be (B,{s},{w + h},{k})")

    def cluster_features(self, batch: dict[str, np.ndarray]) -> list[np.ndarray]:
        """Per-cluster convolution outputs before any cross-cluster mixing."""
        self._check_batch(batch)
        feats = self.mkconv(Tensor(batch["residual"]))
        out = []
        for j, f in enumerate(feats):
            pooled = nn.maxpool2d(f, (1, self.config.conv_pool))
            out.append(self.cluster_conv2[j](pooled).data.copy())
        return out

    def forward(self, batch: dict[str, np.ndarray], training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        self._check_batch(batch)
        cfg = self.config
        s, w, h = self.n_sensors, cfg.window, cfg.horizon
        v = cfg.proj_channels
        b = batch["residual"].shape[0]

        feats = self.mkconv(Tensor(batch["residual"]))
        flat_feats = []
        for j, f in enumerate(feats):
            pooled = nn.maxpool2d(f, (1, cfg.conv_pool))
            conv2 = self.cluster_conv2[j](pooled)
            flat_feats.append(nn.reshape(conv2, (b, -1)))
        merged = nn.concat(flat_feats, axis=1)
        grid = nn.reshape(self.proj(merged), (b, w, s, v, 1))

        trend_flat = nn.reshape(Tensor(batch["trend"]), (b, -1))
        trend_grid = nn.reshape(self.trend_proj(trend_flat), (b, w, s, v, 1))
        block = nn.concat([grid, trend_grid], axis=4)

        h1, c1 = self.lstm1.zero_state(b)
        h2, c2 = self.lstm2.zero_state(b)
        for step in range(w):
            x_t = nn.take_index(block, step, axis=1)
            h1, c1 = self.lstm1.step(x_t, h1, c1)
            h2, c2 = self.lstm2.step(h1, h2, c2)

        post = self.post(nn.reshape(h2, (b, -1)))
        seasonal_flow = nn.reshape(Tensor(batch["seasonal"][:, :, :, 0]), (b, -1))
        joined = nn.concat([post, seasonal_flow], axis=1)
        y_bar = nn.reshape(self.head(joined), (b, s, h))
        if not self.use_dae:
            return y_bar

        dae_outs = []
        for j, members in enumerate(self.clusters):
            rows = nn.reshape(nn.gather_rows(y_bar, members), (b, len(members) * h))
            dae_outs.append(self.dae_heads[j](rows, training, rng))
        resolved = self.fct(nn.concat(dae_outs, axis=1))
        return nn.reshape(resolved, (b, s, h))

    def predict(self, batch: dict[str, np.ndarray], batch_size: int = 256) -> np.ndarray:
        n = batch["residual"].shape[0]
        outs = []
        for lo in range(0, n, batch_size):
            piece = {k: v[lo:lo + batch_size] for k, v in batch.items()}
            outs.append(self.forward(piece, training=False).data)
        return np.concatenate(outs, axis=0)


def build_forecaster(clusters, n_sensors: int, n_features: int, config: ForecasterConfig,
                     seed: int, pretrained_dae=None) -> Forecaster:
    """Assemble the forecaster; `clusters` may be a MembershipMatrix or member lists."""
    member_lists = clusters.clusters if hasattr(clusters, "clusters") else clusters
    return Forecaster(member_lists, n_sensors, n_features, config, seed,
                      pretrained_dae=pretrained_dae)


def cluster_target_blocks(windows: WindowSet, clusters: list[list[int]]) -> list[np.ndarray]:
    """Flattened clean target blocks per cluster for DAE pretraining."""
    return [windows.target_st[:, members, :].reshape(len(windows), -1)
            for members in clusters]


# -- training -------------------------------------------------------------------------


@dataclass
class TrainHistory:
    epochs: list[int]
    train_loss: list[float]
    val_loss: list[float]
    wall_ms: list[float]

    def write_log(self, path: str) -> None:
        with open(path, "w") as fh:
            for e, tr, vl, ms in zip(self.epochs, self.train_loss, self.val_loss,
                                     self.wall_ms):
                fh.write(f"epoch={e} train_loss={tr:.9g} val_loss={vl:.9g} "
                         f"wall_ms={ms:.1f}\n")


def evaluate_mse(model: Forecaster, windows: WindowSet, batch_size: int = 256) -> float:
    pred = model.predict(windows.batch_dict(), batch_size=batch_size)
    return float(np.mean((pred - windows.target_st) ** 2))


def train(model: Forecaster, windows: WindowSet, config: ForecasterConfig, seed: int,
          val_fraction: float = 0.1, divergence_factor: float = 10.0,
          divergence_patience: int = 5) -> TrainHistory:
    """Minimize forecast MSE with ADAM over stride-1 window batches.

    The last `val_fraction` of the training span is held out for the
    validation curve; training aborts with TrainingDivergence when the epoch
    loss exceeds `divergence_factor` times the first epoch's loss for
    `divergence_patience` consecutive epochs.
    """
    n = len(windows)
    if n == 0:
        raise InsufficientDataError("no training windows")
    n_val = int(n * val_fraction)
    train_set = windows.subset(np.arange(n - n_val)) if n_val else windows
    val_set = windows.subset(np.arange(n - n_val, n)) if n_val else None

    rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    adam = nn.Adam(model.parameters(), lr=config.learning_rate)
    history = TrainHistory([], [], [], [])
    batch = min(config.batch_size, len(train_set))
    initial_loss = max(evaluate_mse(model, train_set), 1e-12)
    bad_epochs = 0
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train_set))
        total, seen = 0.0, 0
        for lo in range(0, len(train_set), batch):
            idx = order[lo:lo + batch]
            out = model.forward(train_set.batch_dict(idx), training=True, rng=rng)
            loss = nn.mean(nn.square(out - Tensor(train_set.target_st[idx])))
            adam.zero_grad()
            loss.backward()
            adam.step()
            total += float(loss.data) * len(idx)
            seen += len(idx)
        train_loss = total / seen
        val_loss = evaluate_mse(model, val_set) if val_set is not None else float("nan")
        history.epochs.append(epoch)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.wall_ms.append((time.perf_counter() - started) * 1000.0)
        if not np.isfinite(train_loss) or train_loss > divergence_factor * initial_loss:
            bad_epochs += 1
            if bad_epochs >= divergence_patience or not np.isfinite(train_loss):
                raise TrainingDivergence(
                    f"epoch {epoch}: loss {train_loss:.4g} vs initial {initial_loss:.4g}")
        else:
            bad_epochs = 0
    return history
