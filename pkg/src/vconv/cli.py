"""Batch pipeline and command-line front end.

Verbs: analyze, train, convert, evaluate, poles, gen-corpus.  All outputs
(feature files, model files, reports, WAVs) are deterministic functions of
the inputs and flags, so reruns are byte-identical.

Feature files are CSV with a `# key=value` header block and one row per
frame: gain followed by the LSF radians.  Residual files use the same
shape: header, one initial-state row, then one row of residual samples
per hop segment.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .align import dtw_align, pair_frames
from .eval import ConversionReport, conversion_report
from .lpc import (FilterUnstableError, LpcFrame, RootConvergenceError,
                  analyze_frame, inverse_filter, lpc_poles, synthesis_filter)
from .lsf import LsfConversionError, lpc_to_lsf, lsf_to_lpc, rectify_lsf, validate_lsf
from .mlp import MlpModel, TrainConfig, forward, init_mlp, load_model, save_model, train
from .signal_io import (Waveform, deemphasize, frame_signal, hop_segments,
                        preemphasize, read_wav, write_wav)
from .testkit import build_corpus

FEATURE_VERSION = 1
RESIDUAL_VERSION = 1

REPORT_HEADER = "pair,mcd_src_tgt,mcd_conv_tgt,mcd_src_conv,percent_decrease"
POLES_HEADER = "frame,re,im,magnitude"


class FeatureFormatError(ValueError):
    """Feature or residual file is malformed."""


@dataclass
class FeatureTrack:
    """Per-frame (gain, LSF radians) plus the analysis settings that made it."""

    lsf: np.ndarray  # (frames, order), each row strictly ascending in (0, pi)
    gains: np.ndarray  # (frames,)
    sample_rate: int
    frame_ms: float
    hop_ms: float
    order: int
    alpha: float
    sigma: float
    fallbacks: int = 0  # frames that reused the previous frame's LSF

    def __len__(self):
        return len(self.gains)

    @property
    def normalized(self) -> np.ndarray:
        """LSF divided by pi: the network's input/output domain."""
        return self.lsf / np.pi


@dataclass
class ResidualTrack:
    """Prediction-error samples per hop segment, for streaming resynthesis."""

    segments: np.ndarray  # (frames, hop)
    initial_state: np.ndarray  # (order,) input history before segment 0
    sample_rate: int
    alpha: float

    def __len__(self):
        return len(self.segments)

    @property
    def hop(self) -> int:
        return self.segments.shape[1]


@dataclass
class ConvertStats:
    total_frames: int
    unstable_frames: int  # mapped filters with a pole magnitude >= 1
    overflow_frames: int  # synthesis segments muted after blowing up
    fallback_frames: int  # analysis-side LSF fallbacks


def uniform_lsf(order: int) -> np.ndarray:
    """LSF vector of the trivial (all-zero) predictor: k*pi/(p+1)."""
    return np.arange(1, order + 1) * np.pi / (order + 1)


def analyze_waveform(wave: Waveform, order: int = 24, frame_ms: float = 25.0,
                     hop_ms: float = 5.0, alpha: float = 0.97,
                     sigma: float = 0.4):
    """Full analysis: pre-emphasis, framing, LPC, LSF, residual extraction.

    Residuals are produced with each frame's LSF-reconstructed filter (the
    exact coefficients a reader of the feature file will rebuild), so
    resynthesis from the two artifacts reproduces the pre-emphasized
    signal.  Frames whose LSF conversion fails reuse the previous frame's
    vector and are counted in `fallbacks`.
    """
    if order < 2 or order % 2 != 0:
        raise ValueError(f"order must be a positive even number, got {order}")
    pre = preemphasize(wave, alpha)
    frames = frame_signal(pre, frame_ms, hop_ms, sigma)
    segments = hop_segments(pre, frames.hop, len(frames))

    lsf_rows = np.empty((len(frames), order))
    gains = np.empty(len(frames))
    fallbacks = 0
    previous = uniform_lsf(order)
    for i in range(len(frames)):
        lpcf = analyze_frame(frames.frames[i], order)
        try:
            omegas = lpc_to_lsf(lpcf)
        except LsfConversionError:
            omegas = previous.copy()
            fallbacks += 1
        lsf_rows[i] = omegas
        gains[i] = lpcf.gain
        previous = omegas

    state = np.zeros(order)
    initial_state = state.copy()
    residuals = np.empty((len(frames), frames.hop))
    for i in range(len(frames)):
        filt = lsf_to_lpc(lsf_rows[i], gains[i])
        residuals[i], state = inverse_filter(segments[i], filt, state)

    feats = FeatureTrack(lsf=lsf_rows, gains=gains, sample_rate=wave.sample_rate,
                         frame_ms=frame_ms, hop_ms=hop_ms, order=order,
                         alpha=alpha, sigma=sigma, fallbacks=fallbacks)
    resid = ResidualTrack(segments=residuals, initial_state=initial_state,
                          sample_rate=wave.sample_rate, alpha=alpha)
    return feats, resid


def resynthesize(feats: FeatureTrack, resid: ResidualTrack) -> Waveform:
    """Stream the residual through the per-frame filters; output stays in
    the pre-emphasized domain (apply deemphasize for audio)."""
    if len(feats) != len(resid):
        raise ValueError(f"{len(feats)} feature frames vs "
                         f"{len(resid)} residual segments")
    state = np.asarray(resid.initial_state, dtype=np.float64).copy()
    pieces = []
    for i in range(len(feats)):
        filt = lsf_to_lpc(feats.lsf[i], feats.gains[i])
        seg, state = synthesis_filter(resid.segments[i], filt, state)
        pieces.append(seg)
    return Waveform(samples=np.concatenate(pieces),
                    sample_rate=resid.sample_rate)


def _frame_unstable(frame: LpcFrame) -> bool:
    try:
        poles = lpc_poles(frame)
    except RootConvergenceError as err:
        poles = err.roots
    return bool(np.any(np.abs(poles) >= 1.0))


def map_features(model: MlpModel, feats: FeatureTrack, raw_lpc: bool = False):
    """Map every frame through the network; returns (frames, ConvertStats).

    Default mode maps pi-normalized LSF and rectifies the output, so every
    produced filter is stable by construction.  raw_lpc mode maps the
    predictor coefficients directly with no validity repair; instability
    is counted, not fixed.
    """
    sizes = model.layer_sizes
    if sizes[0] != feats.order or sizes[-1] != feats.order:
        raise ValueError(f"model maps {sizes[0]}->{sizes[-1]} dims, "
                         f"features have order {feats.order}")
    if raw_lpc:
        coeffs = np.stack([lsf_to_lpc(feats.lsf[i], 1.0).coefficients
                           for i in range(len(feats))])
        mapped = forward(model, coeffs)
        frames = [LpcFrame(coefficients=mapped[i].copy(), gain=feats.gains[i])
                  for i in range(len(feats))]
    else:
        mapped = forward(model, feats.normalized)
        frames = [lsf_to_lpc(rectify_lsf(mapped[i] * np.pi), feats.gains[i])
                  for i in range(len(feats))]
    unstable = sum(_frame_unstable(f) for f in frames)
    stats = ConvertStats(total_frames=len(frames), unstable_frames=unstable,
                         overflow_frames=0, fallback_frames=feats.fallbacks)
    return frames, stats


def synthesize_frames(frames, resid: ResidualTrack):
    """Stream residual segments through mapped filters.

    A segment whose synthesis blows up is muted and the filter state reset;
    the count of such segments is returned alongside the waveform.
    """
    if len(frames) != len(resid):
        raise ValueError(f"{len(frames)} filters vs {len(resid)} segments")
    order = frames[0].order if frames else 0
    state = np.zeros(order)
    overflow = 0
    pieces = []
    for i, filt in enumerate(frames):
        try:
            seg, state = synthesis_filter(resid.segments[i], filt, state)
        except FilterUnstableError:
            seg = np.zeros(resid.hop)
            state = np.zeros(order)
            overflow += 1
        pieces.append(seg)
    wave = Waveform(samples=np.concatenate(pieces),
                    sample_rate=resid.sample_rate)
    return wave, overflow


def convert_waveform(model: MlpModel, wave: Waveform, order: int = 24,
                     frame_ms: float = 25.0, hop_ms: float = 5.0,
                     alpha: float = 0.97, sigma: float = 0.4,
                     raw_lpc: bool = False):
    """analyze -> map -> resynthesize -> de-emphasize.

    Returns (converted waveform, mapped frames, ConvertStats).
    """
    feats, resid = analyze_waveform(wave, order, frame_ms, hop_ms, alpha, sigma)
    frames, stats = map_features(model, feats, raw_lpc)
    synth, overflow = synthesize_frames(frames, resid)
    stats.overflow_frames = overflow
    return deemphasize(synth, alpha), frames, stats


# ---------------------------------------------------------------------------
# file formats

def _g(value: float) -> str:
    return format(value, ".17g")


def write_features(feats: FeatureTrack, path) -> None:
    lines = [f"# version={FEATURE_VERSION}",
             f"# sample_rate={feats.sample_rate}",
             f"# frame_ms={_g(feats.frame_ms)}",
             f"# hop_ms={_g(feats.hop_ms)}",
             f"# order={feats.order}",
             f"# alpha={_g(feats.alpha)}",
             f"# sigma={_g(feats.sigma)}",
             f"# fallbacks={feats.fallbacks}"]
    for i in range(len(feats)):
        row = np.concatenate([[feats.gains[i]], feats.lsf[i]])
        lines.append(",".join(_g(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_tagged_csv(path, what: str):
    meta = {}
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" not in body:
                    raise FeatureFormatError(
                        f"{path}:{lineno}: malformed {what} header {line!r}")
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
                continue
            try:
                rows.append(np.array([float(tok) for tok in line.split(",")]))
            except ValueError as exc:
                raise FeatureFormatError(
                    f"{path}:{lineno}: unreadable {what} row") from exc
    return meta, rows


def _meta_value(meta: dict, key: str, cast, path) -> float:
    if key not in meta:
        raise FeatureFormatError(f"{path}: missing header key {key!r}")
    try:
        return cast(meta[key])
    except ValueError as exc:
        raise FeatureFormatError(f"{path}: bad header value for {key!r}") from exc


def read_features(path) -> FeatureTrack:
    meta, rows = _read_tagged_csv(path, "feature")
    version = _meta_value(meta, "version", int, path)
    if version != FEATURE_VERSION:
        raise FeatureFormatError(f"{path}: unsupported feature version {version}")
    order = _meta_value(meta, "order", int, path)
    if not rows:
        raise FeatureFormatError(f"{path}: no frames")
    table = np.stack(rows) if all(len(r) == order + 1 for r in rows) else None
    if table is None:
        raise FeatureFormatError(f"{path}: rows must hold gain plus {order} LSF values")
    lsf = table[:, 1:]
    for i, row in enumerate(lsf):
        if not validate_lsf(row):
            raise FeatureFormatError(f"{path}: frame {i} LSF row is not "
                                     "strictly ascending in (0, pi)")
    return FeatureTrack(
        lsf=lsf, gains=table[:, 0],
        sample_rate=_meta_value(meta, "sample_rate", int, path),
        frame_ms=_meta_value(meta, "frame_ms", float, path),
        hop_ms=_meta_value(meta, "hop_ms", float, path),
        order=order,
        alpha=_meta_value(meta, "alpha", float, path),
        sigma=_meta_value(meta, "sigma", float, path),
        fallbacks=int(meta.get("fallbacks", 0)),
    )


def write_residuals(resid: ResidualTrack, path) -> None:
    lines = [f"# version={RESIDUAL_VERSION}",
             f"# sample_rate={resid.sample_rate}",
             f"# hop={resid.hop}",
             f"# order={len(resid.initial_state)}",
             f"# alpha={_g(resid.alpha)}",
             ",".join(_g(v) for v in resid.initial_state)]
    for seg in resid.segments:
        lines.append(",".join(_g(v) for v in seg))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_residuals(path) -> ResidualTrack:
    meta, rows = _read_tagged_csv(path, "residual")
    version = _meta_value(meta, "version", int, path)
    if version != RESIDUAL_VERSION:
        raise FeatureFormatError(f"{path}: unsupported residual version {version}")
    hop = _meta_value(meta, "hop", int, path)
    order = _meta_value(meta, "order", int, path)
    if not rows:
        raise FeatureFormatError(f"{path}: missing initial-state row")
    if len(rows[0]) != order:
        raise FeatureFormatError(f"{path}: initial state has {len(rows[0])} "
                                 f"values, order says {order}")
    if any(len(r) != hop for r in rows[1:]):
        raise FeatureFormatError(f"{path}: segment rows must hold {hop} samples")
    segments = np.stack(rows[1:]) if len(rows) > 1 else np.empty((0, hop))
    return ResidualTrack(
        segments=segments, initial_state=rows[0],
        sample_rate=_meta_value(meta, "sample_rate", int, path),
        alpha=_meta_value(meta, "alpha", float, path),
    )


def write_report(entries, path) -> None:
    """entries: list of (pair name, ConversionReport); appends a MEAN row
    (column-wise mean, percent included)."""
    lines = [REPORT_HEADER]
    table = []
    for name, rep in entries:
        vals = [rep.mcd_source_target, rep.mcd_converted_target,
                rep.mcd_source_converted, rep.percent_decrease]
        table.append(vals)
        lines.append(name + "," + ",".join(f"{v:.6f}" for v in vals))
    if table:
        means = np.mean(np.asarray(table), axis=0)
        lines.append("MEAN," + ",".join(f"{v:.6f}" for v in means))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_poles(frames, path) -> None:
    """CSV of every frame's pole coordinates; frames that defeat the root
    finder contribute its best iterate."""
    lines = [POLES_HEADER]
    for i, frame in enumerate(frames):
        try:
            poles = lpc_poles(frame)
        except RootConvergenceError as err:
            poles = err.roots
        for z in poles:
            lines.append(f"{i},{_g(z.real)},{_g(z.imag)},{_g(abs(z))}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands

def _load_track(path, args) -> FeatureTrack:
    """A WAV path is analyzed with the current flags; anything else is read
    as a feature file."""
    if str(path).lower().endswith(".wav"):
        feats, _ = analyze_waveform(read_wav(path), args.order, args.frame_ms,
                                    args.hop_ms, args.alpha, args.sigma)
        return feats
    feats = read_features(path)
    if feats.order != args.order:
        raise ValueError(f"{path}: feature order {feats.order} does not "
                         f"match --order {args.order}")
    return feats


def cmd_analyze(args) -> int:
    wave = read_wav(args.input)
    feats, resid = analyze_waveform(wave, args.order, args.frame_ms,
                                    args.hop_ms, args.alpha, args.sigma)
    write_features(feats, args.features)
    if args.residuals:
        write_residuals(resid, args.residuals)
    print(f"{args.input}: {len(feats)} frames, order {feats.order}, "
          f"{feats.fallbacks} fallbacks")
    return 0


def cmd_train(args) -> int:
    if len(args.source) != len(args.target):
        raise ValueError(f"{len(args.source)} source vs {len(args.target)} "
                         "target utterances")
    sizes = args.arch
    if sizes[0] != args.order or sizes[-1] != args.order:
        raise ValueError(f"architecture {'-'.join(map(str, sizes))} does not "
                         f"map order-{args.order} features")
    pairs = []
    for src, tgt in zip(args.source, args.target):
        fs = _load_track(src, args)
        ft = _load_track(tgt, args)
        alignment = dtw_align(fs.normalized, ft.normalized)
        if args.raw_lpc:
            ca = np.stack([lsf_to_lpc(row, 1.0).coefficients for row in fs.lsf])
            cb = np.stack([lsf_to_lpc(row, 1.0).coefficients for row in ft.lsf])
            pairs.extend(pair_frames(alignment, ca, cb))
        else:
            pairs.extend(pair_frames(alignment, fs.normalized, ft.normalized))

    model = init_mlp(sizes, args.seed)
    config = TrainConfig(learning_rate=args.lr, momentum=args.momentum,
                         max_epochs=args.epochs, seed=args.seed)
    trained, report = train(model, pairs, config)
    save_model(trained, args.model_out)
    mse_out = args.mse_out or str(args.model_out) + ".mse.csv"
    with open(mse_out, "w") as fh:
        fh.write("epoch,mse\n")
        for i, mse in enumerate(report.mse_history, 1):
            fh.write(f"{i},{_g(mse)}\n")
    print(f"{args.model_out}: {len(pairs)} pairs, {report.epochs_run} epochs, "
          f"final mse {report.final_mse:.6g}"
          + (" (converged)" if report.converged else ""))
    return 0


def cmd_convert(args) -> int:
    model = load_model(args.model)
    wave = read_wav(args.input)
    out, frames, stats = convert_waveform(
        model, wave, args.order, args.frame_ms, args.hop_ms, args.alpha,
        args.sigma, raw_lpc=args.raw_lpc)
    write_wav(out, args.output)
    if args.poles_out:
        write_poles(frames, args.poles_out)
    print(f"{args.output}: {stats.total_frames} frames, "
          f"{stats.unstable_frames} unstable, {stats.overflow_frames} muted, "
          f"{stats.fallback_frames} fallbacks")
    return 0


def cmd_evaluate(args) -> int:
    if not len(args.source) == len(args.target) == len(args.converted):
        raise ValueError("need equal counts of --source/--target/--converted")
    entries = []
    for src, tgt, conv in zip(args.source, args.target, args.converted):
        fs = _load_track(src, args)
        ft = _load_track(tgt, args)
        fc = _load_track(conv, args)
        rep = conversion_report(fs.normalized, ft.normalized, fc.normalized)
        entries.append((Path(src).stem, rep))
    write_report(entries, args.out)
    mean_pct = float(np.mean([rep.percent_decrease for _, rep in entries]))
    print(f"{args.out}: {len(entries)} pairs, mean percent decrease "
          f"{mean_pct:.2f}")
    return 0


def cmd_poles(args) -> int:
    if str(args.input).lower().endswith(".wav"):
        pre = preemphasize(read_wav(args.input), args.alpha)
        frames = frame_signal(pre, args.frame_ms, args.hop_ms, args.sigma)
        lpc_frames = [analyze_frame(frames.frames[i], args.order)
                      for i in range(len(frames))]
    else:
        feats = read_features(args.input)
        lpc_frames = [lsf_to_lpc(feats.lsf[i], feats.gains[i])
                      for i in range(len(feats))]
    write_poles(lpc_frames, args.out)
    print(f"{args.out}: {len(lpc_frames)} frames")
    return 0


def cmd_gen_corpus(args) -> int:
    manifest = build_corpus(args.out_dir, pairs=args.pairs,
                            duration_s=args.duration, sample_rate=args.rate,
                            seed=args.seed, snr_db=args.snr)
    print(f"{args.out_dir}: {len(manifest['pairs'])} pairs"
          + (f" at {args.snr} dB SNR" if args.snr is not None else ""))
    return 0


def _parse_arch(text: str):
    try:
        sizes = [int(tok) for tok in text.split("-")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad architecture {text!r}; "
                                         "expected e.g. 24-50-24")
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError(f"bad architecture {text!r}; "
                                         "need at least two positive sizes")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    analysis = argparse.ArgumentParser(add_help=False)
    analysis.add_argument("--order", type=int, default=24,
                          help="LPC order (even; default 24)")
    analysis.add_argument("--frame-ms", type=float, default=25.0,
                          help="frame length in ms (default 25)")
    analysis.add_argument("--hop-ms", type=float, default=5.0,
                          help="frame step in ms (default 5)")
    analysis.add_argument("--alpha", type=float, default=0.97,
                          help="pre-emphasis coefficient (default 0.97)")
    analysis.add_argument("--sigma", type=float, default=0.4,
                          help="Gaussian window width factor (default 0.4)")

    parser = argparse.ArgumentParser(
        prog="vconv",
        description="LPC/LSF voice conversion: analysis, neural mapping, "
                    "resynthesis, evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[analysis],
                       help="extract LSF features and residuals from a WAV")
    p.add_argument("input")
    p.add_argument("--features", required=True, help="output feature CSV")
    p.add_argument("--residuals", help="output residual CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", parents=[analysis],
                       help="train a mapping network on utterance pairs")
    p.add_argument("--source", nargs="+", required=True,
                   help="source WAVs or feature files")
    p.add_argument("--target", nargs="+", required=True,
                   help="target WAVs or feature files, same count")
    p.add_argument("--model-out", required=True)
    p.add_argument("--mse-out", help="epoch/MSE CSV (default MODEL.mse.csv)")
    p.add_argument("--arch", type=_parse_arch, default=[24, 50, 24],
                   help="layer sizes, e.g. 24-50-24")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--epochs", type=int, default=5000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--raw-lpc", action="store_true",
                   help="map predictor coefficients instead of LSF")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("convert", parents=[analysis],
                       help="convert a WAV through a trained model")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--raw-lpc", action="store_true",
                   help="map predictor coefficients instead of LSF")
    p.add_argument("--poles-out", help="CSV of mapped-filter poles")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("evaluate", parents=[analysis],
                       help="report spectral distortion for converted audio")
    p.add_argument("--source", nargs="+", required=True)
    p.add_argument("--target", nargs="+", required=True)
    p.add_argument("--converted", nargs="+", required=True)
    p.add_argument("--out", required=True, help="report CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("poles", parents=[analysis],
                       help="dump per-frame filter poles to CSV")
    p.add_argument("input", help="WAV or feature file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_poles)

    p = sub.add_parser("gen-corpus",
                       help="write a synthetic speaker-pair corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--duration", type=float, default=0.62,
                   help="utterance length in seconds")
    p.add_argument("--rate", type=int, default=11025)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--snr", type=float, default=None,
                   help="add white noise at this SNR in dB")
    p.set_defaults(func=cmd_gen_corpus)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
