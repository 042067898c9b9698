"""End-to-end driver: ranking, selection, feature weighting, fusion, convLSTM.

Frames are processed strictly in order.  The prediction for frame ``t`` only
uses frames ``0..t``: the class ranking is built from the frames before ``t``
and the recurrent state carries information forward only.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ksora.convlstm import ConvLSTMParams, ConvLSTMStack, readout
from ksora.errors import ConfigurationError, IngestionError
from ksora.harness.extractors import ToyExtractor, motion_input, object_input
from ksora.kos import global_ranking, select_and_augment
from ksora.metrics import evaluate_frame
from ksora.tensor import ConvParams, resample
from ksora.wfe import pyramid_fuse, weight_features

log = logging.getLogger(__name__)

WFE_TAPS = ("obj_fine", "obj_coarse", "flow_fine", "flow_coarse")


@dataclass
class Model:
    obj: ToyExtractor
    flow: ToyExtractor
    wfe: dict
    lstm1: ConvLSTMParams
    lstm2: ConvLSTMParams
    readout_w: np.ndarray
    readout_b: float
    dropout_seed: int

    @classmethod
    def build(cls, cfg, height, width):
        """Seeded parameters for frames of ``height x width`` (both even)."""
        seq = np.random.SeedSequence(cfg.seed)
        r_obj, r_flow, r_wfe, r_lstm, r_out, r_drop = (np.random.default_rng(s) for s in seq.spawn(6))
        c, d = cfg.feat_channels, cfg.extractor_depth
        obj = ToyExtractor(1, c, d, cfg.obj_tap_fine, cfg.obj_tap_coarse, r_obj)
        flow = ToyExtractor(3, c, d, cfg.flow_tap_fine, cfg.flow_tap_coarse, r_flow)
        wfe = {name: ConvParams.random(c, c, r_wfe, scale=cfg.wfe_init_scale) for name in WFE_TAPS}
        h2, w2 = height // 2, width // 2
        hid = cfg.lstm_hidden
        lstm1 = ConvLSTMParams.random(2 * c, hid, h2, w2, r_lstm, scale=cfg.lstm_init_scale)
        lstm2 = ConvLSTMParams.random(hid, hid, h2, w2, r_lstm, scale=cfg.lstm_init_scale)
        readout_w = r_out.normal(0.0, 1.0 / np.sqrt(hid), size=hid)
        return cls(obj, flow, wfe, lstm1, lstm2, readout_w, 0.0, int(r_drop.integers(2**31)))

    def lstm_tensors(self):
        out = {f"layer1.{k}": v for k, v in self.lstm1.tensors().items()}
        out.update({f"layer2.{k}": v for k, v in self.lstm2.tensors().items()})
        out["readout.w"] = self.readout_w
        out["readout.b"] = np.array([self.readout_b])
        return out

    def with_lstm_tensors(self, tensors):
        """Replace convLSTM/readout parameters from a snapshot mapping."""
        try:
            l1 = {k.split(".", 1)[1]: v for k, v in tensors.items() if k.startswith("layer1.")}
            l2 = {k.split(".", 1)[1]: v for k, v in tensors.items() if k.startswith("layer2.")}
            p1, p2 = ConvLSTMParams(**l1), ConvLSTMParams(**l2)
            w = np.asarray(tensors["readout.w"], dtype=np.float64).reshape(-1)
            b = float(np.asarray(tensors["readout.b"]).reshape(-1)[0])
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"incomplete convLSTM snapshot: {exc}") from exc
        if p1.spatial != self.lstm1.spatial or p1.in_channels != self.lstm1.in_channels:
            raise ConfigurationError("snapshot convLSTM shapes do not match the frame size / features")
        return Model(self.obj, self.flow, self.wfe, p1, p2, w, b, self.dropout_seed)


@dataclass
class PipelineResult:
    predictions: list
    reports: list
    records: list = None


def run_pipeline(bundle, cfg, model=None):
    """Predict one saliency map per frame; also score them when ground truth exists."""
    bundle.validate()
    n = len(bundle)
    if n == 0:
        return PipelineResult([], [], [] if bundle.has_ground_truth else None)
    h, w = bundle.shape
    if h % 2 or w % 2:
        raise IngestionError(0, f"frame dims must be even for the two-level pyramid, got {h}x{w}")
    if model is None:
        model = Model.build(cfg, h, w)
    kos = cfg.kos_params()
    stack = ConvLSTMStack(model.lstm1, model.lstm2, cfg.dropout, cfg.train, seed=model.dropout_seed)

    history = []
    predictions, reports = [], []
    for t in range(n):
        frame, sal, props = bundle.frames[t], bundle.saliency[t], bundle.proposals[t]
        ranking = global_ranking(history, kos.tau, kos.normalize)
        f_aug, report = select_and_augment(frame, sal, props, ranking, kos, frame=t)
        reports.append(report)

        obj_fine, obj_coarse = model.obj(object_input(frame))
        _, fea_kso = model.obj(object_input(f_aug))
        prev = bundle.frames[t - 1] if t else frame
        flow_fine, flow_coarse = model.flow(motion_input(prev, frame))
        gamma = pyramid_fuse(
            weight_features(flow_coarse, model.wfe["flow_coarse"]),
            weight_features(obj_coarse, model.wfe["obj_coarse"]),
            weight_features(flow_fine, model.wfe["flow_fine"]),
            weight_features(obj_fine, model.wfe["obj_fine"]),
        )
        _, top = stack.step(np.concatenate([gamma, fea_kso], axis=0))
        coarse = readout(top.H, model.readout_w, model.readout_b)
        pred = resample(coarse[None], h, w, "nearest_up")[0]
        predictions.append(pred.astype(np.float32))
        history.append((sal, props))

    records = None
    if bundle.has_ground_truth:
        records = []
        for t, pred in enumerate(predictions):
            density = bundle.density[t] if bundle.density is not None else None
            records.append(evaluate_frame(
                f"{t:06d}", pred, density, bundle.fixations[t],
                emd_mode=cfg.emd_mode, n_thresholds=cfg.pr_thresholds,
                auc_negatives=cfg.auc_negatives,
            ))
    return PipelineResult(predictions, reports, records)
