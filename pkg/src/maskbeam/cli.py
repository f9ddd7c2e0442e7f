"""Command-line interface: ``enhance``, ``compare``, ``simulate`` and ``verify``.

Exit codes: 0 success, 1 file or dimension errors, 2 usage errors (unknown
filter, empty filter list, missing mask source), 3 degenerate statistics,
4 a failed ``verify`` check.
"""

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .exceptions import DegenerateStatisticsError, SingularMatrixError
from .filters import CATALOGUE, PARAMETRIC, compute_weights, residual_noise_power
from .linalg import regularize
from .masks import MaskPair, median_fuse, oracle_masks, read_mask_file
from .metrics import cepstral_features, fv_metric, pseudo_states, sd_metric
from .scenes import GEOMETRIES, NOISE_KINDS, generate_scene, render_stems
from .stats import covariance_recursive, covariance_utterance, select_reference
from .stft import StftConfig, analyze, apply_weights, synthesize
from .validation import check_masks, check_reference
from .verify import run_checks
from .wavio import SAMPLE_RATE, read_wav, write_wav

REPORT_SCHEMA = "maskbeam-report/1"
MANIFEST_SCHEMA = "maskbeam-scene/1"
DEFAULT_BASELINE = "r1mwf-0"
DEFAULT_STATES = 20
# r1mwf variants that share a direction, grouped by reconstruction method
DIRECTION_GROUPS = {
    "plain": ("r1mwf-0", "r1mwf-1", "r1mwf-5", "r1mwf-10", "r1mwf-mug"),
    "evd": ("r1mwf-1-evd", "r1mwf-mug-evd"),
    "gevd": ("r1mwf-1-gevd", "r1mwf-mug-gevd"),
}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


@dataclass
class Utterance:
    """Everything derived from one input before any filter is applied."""

    cfg: StftConfig
    samples: int
    spec: np.ndarray
    clean: Optional[np.ndarray]
    noise: Optional[np.ndarray]
    masks: MaskPair
    mask_source: str
    reference: int
    reference_scores: Optional[np.ndarray]
    cov: object
    # noise covariance after the diagonal loading the filters apply
    nn_eff: np.ndarray
    loaded: np.ndarray


# ---------------------------------------------------------------- helpers


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _clean_json(obj):
    """Convert numpy scalars and drop non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean_json(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite(obj)
    return obj


def _write_json(path, payload):
    text = json.dumps(_clean_json(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def _power_db(num, den):
    if den <= 0 or num <= 0:
        return None
    return _finite(10.0 * math.log10(num / den))


def _degenerate(err, bins):
    if isinstance(err, SingularMatrixError) and err.index is not None:
        where = [err.index % bins]
    else:
        where = sorted({b % bins for b in getattr(err, "bins", ())})
    label = ", ".join(str(b) for b in where[:8]) if where else "unknown"
    return CliError(3, f"degenerate statistics at frequency bin {label}: {err}")


def _stft_config(args):
    try:
        return StftConfig(fft_size=args.fft_size, hop=args.hop, sample_rate=SAMPLE_RATE)
    except ValueError as err:
        raise CliError(2, str(err)) from None


def _check_filter(name):
    name = name.strip().lower()
    if name not in CATALOGUE and name not in PARAMETRIC:
        raise CliError(2, f"unknown filter {name!r}; choose from {', '.join(CATALOGUE)}")
    return name


# ---------------------------------------------------------------- pipeline


def _load_masks(paths, frames, bins):
    pair = []
    for path, quantity in zip(paths, ("speech", "noise")):
        header, data = read_mask_file(path)
        if header["quantity"] != quantity:
            raise ValueError(f"{path}: holds a {header['quantity']} mask, expected {quantity}")
        if data.shape[1:] != (frames, bins):
            raise ValueError(
                f"{path}: mask dimensions frames={data.shape[1]} bins={data.shape[2]} do not "
                f"match input frames={frames} bins={bins}"
            )
        pair.append(data[0] if data.shape[0] == 1 else data)
    return check_masks(MaskPair(*pair), frames, bins)


def prepare(args, cfg, input_path, clean_path=None, noise_path=None, mask_paths=None):
    """Read audio, build masks and estimate the shared statistics."""
    try:
        y = read_wav(input_path, cfg.sample_rate)
        if y.shape[1] < cfg.fft_size:
            raise ValueError(f"{input_path}: {y.shape[1]} samples is shorter than one frame")
        spec = analyze(y, cfg)
        m, frames, bins = spec.shape
        stems = {}
        for label, path in (("clean", clean_path), ("noise", noise_path)):
            if path is None:
                continue
            s = read_wav(path, cfg.sample_rate)
            if s.shape != y.shape:
                raise ValueError(f"{path}: {label} stem shape {s.shape} differs from input {y.shape}")
            stems[label] = analyze(s, cfg)
        if mask_paths:
            masks, source = _load_masks(mask_paths, frames, bins), "files"
        elif "clean" in stems and "noise" in stems:
            masks = median_fuse(oracle_masks(stems["clean"], stems["noise"], args.lcx_db, args.lcn_db))
            source = "oracle"
        else:
            raise CliError(2, "need --masks SPEECH NOISE or both --clean and --noise stems")
        ref = check_reference(args.ref, m)
    except (OSError, ValueError) as err:
        raise CliError(1, str(err)) from None

    scores = None
    if ref == "auto":
        if m > 1:
            choice = select_reference(spec)
            ref, scores = choice.channel, choice.scores
        else:
            ref = 0
    if args.stats == "utterance":
        cov = covariance_utterance(spec, masks, normalize=args.normalize)
    else:
        cov = covariance_recursive(spec, masks, alpha=args.alpha)
    nn_eff, loaded = regularize(cov.nn)
    return Utterance(cfg, y.shape[1], spec, stems.get("clean"), stems.get("noise"), masks,
                     source, int(ref), scores, cov, nn_eff, loaded)


def _weights(name, utt, mu):
    try:
        return compute_weights(name, utt.cov.xx, utt.cov.nn, ref=utt.reference, mu=mu)
    except (DegenerateStatisticsError, SingularMatrixError) as err:
        raise _degenerate(err, utt.spec.shape[2]) from None


def _snr_per_bin(h, xx, nn):
    num = residual_noise_power(h, xx)
    den = residual_noise_power(h, nn)
    ok = (num > 0) & (den > 0)
    out = np.full(num.shape, np.nan)
    out[ok] = 10.0 * np.log10(num[ok] / den[ok])
    return out


def evaluate(name, utt, mu=None):
    """Weights, enhanced spectrogram and report entry for one filter."""
    w = _weights(name, utt, mu)
    h = w.weights
    out = apply_weights(utt.spec, h)
    snr = _snr_per_bin(h, utt.cov.xx, utt.nn_eff)
    used = np.isfinite(snr)
    rn = residual_noise_power(h, utt.nn_eff)
    entry = {
        "mu": w.mu if isinstance(w.mu, str) or w.mu is None else float(np.asarray(w.mu).mean()),
        "output_snr_db": float(snr[used].mean()) if used.any() else None,
        "output_snr_bins": int(used.sum()),
        "residual_noise_power": {"mean": float(rn.mean()), "std": float(rn.std())},
    }
    ref = utt.reference
    if utt.clean is not None:
        xo = apply_weights(utt.clean, h)
        try:
            entry["sd_mean_db"] = sd_metric(xo, utt.clean[ref], utt.cfg.sample_rate).mean
        except ValueError:
            entry["sd_mean_db"] = None
        if utt.noise is not None:
            no = apply_weights(utt.noise, h)
            entry["measured_snr_db"] = _power_db(np.sum(np.abs(xo) ** 2), np.sum(np.abs(no) ** 2))
    return w, out, entry


def _input_entry(utt):
    ref = utt.reference
    xx = np.real(utt.cov.xx[..., ref, ref])
    nn = np.real(utt.cov.nn[..., ref, ref])
    ok = (xx > 0) & (nn > 0)
    entry = {"output_snr_db": float(np.mean(10 * np.log10(xx[ok] / nn[ok]))) if ok.any() else None}
    if utt.clean is not None and utt.noise is not None:
        entry["measured_snr_db"] = _power_db(np.sum(np.abs(utt.clean[ref]) ** 2),
                                             np.sum(np.abs(utt.noise[ref]) ** 2))
    return entry


def _fv(test_signal, baseline_signal, cfg, states, seed):
    test = cepstral_features(test_signal, cfg)
    base = cepstral_features(baseline_signal, cfg)
    if test.features.shape != base.features.shape:
        raise CliError(1, f"baseline has {base.features.shape[0]} frames, output has "
                          f"{test.features.shape[0]}")
    try:
        labels = pseudo_states(base, min(states, base.features.shape[0]), seed=seed)
    except ValueError:
        return None
    return fv_metric(test.with_labels(labels), base.with_labels(labels)).percentage


def _collinearity(weights):
    """Smallest |h1^H h2| / (|h1| |h2|) over bins for each pair in a direction group."""
    out = {}
    for members in DIRECTION_GROUPS.values():
        present = [n for n in members if n in weights]
        for i, a in enumerate(present):
            for b in present[i + 1:]:
                h1, h2 = weights[a], weights[b]
                n1 = np.linalg.norm(h1, axis=-1)
                n2 = np.linalg.norm(h2, axis=-1)
                ok = (n1 > 0) & (n2 > 0)
                if not ok.any():
                    continue
                dot = np.abs(np.sum(np.conj(h1) * h2, axis=-1))
                out[f"{a}|{b}"] = float(np.min(dot[ok] / (n1[ok] * n2[ok])))
    return out


def _config(args, utt, extra):
    cfg = {k: v for k, v in asdict(utt.cfg).items()}
    cfg.update(
        reference_request=str(args.ref),
        stats=args.stats,
        alpha=args.alpha,
        normalize=args.normalize,
        lcx_db=args.lcx_db,
        lcn_db=args.lcn_db,
        mask_source=utt.mask_source,
        mu=args.mu,
        states=args.states,
        seed=args.seed,
    )
    cfg.update(extra)
    return cfg


def _report(command, args, utt, filters, extra_config, **rest):
    payload = {
        "schema": REPORT_SCHEMA,
        "tool": "maskbeam",
        "tool_version": __version__,
        "command": command,
        "config": _config(args, utt, extra_config),
        "reference": {
            "channel": utt.reference,
            "mode": "auto" if str(args.ref) == "auto" else "fixed",
            "scores": utt.reference_scores,
        },
        "input": _input_entry(utt),
        "statistics": {"mode": utt.cov.mode, "loaded_bins": int(np.sum(utt.loaded))},
        "filters": filters,
    }
    payload.update(rest)
    return payload


# ---------------------------------------------------------------- commands


def _enhance_one(args, cfg, name, input_path, clean, noise, masks, out_path, report_path):
    utt = prepare(args, cfg, input_path, clean, noise, masks)
    _, out, entry = evaluate(name, utt, args.mu)
    signal = synthesize(out, cfg)
    if args.baseline:
        try:
            base = read_wav(args.baseline, cfg.sample_rate)
        except (OSError, ValueError) as err:
            raise CliError(1, str(err)) from None
        entry["fv_percent"] = _fv(signal, base[0], cfg, args.states, args.seed)
    try:
        write_wav(out_path, signal, cfg.sample_rate)
        if report_path:
            extra = {"filter": name, "input": str(input_path), "output": str(out_path),
                     "clean": _str(clean), "noise": _str(noise), "baseline": _str(args.baseline),
                     "masks": [str(p) for p in masks] if masks else None}
            _write_json(report_path, _report("enhance", args, utt, {name: entry}, extra))
    except OSError as err:
        raise CliError(1, str(err)) from None
    return 0


def _str(p):
    return None if p is None else str(p)


def _batch_paths(args):
    """(input, clean, noise, masks, out, report) per utterance of a directory input."""
    src = Path(args.input)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for wav in sorted(src.glob("*.wav")):
        clean = Path(args.clean) / wav.name if args.clean else None
        noise = Path(args.noise) / wav.name if args.noise else None
        masks = [Path(d) / f"{wav.stem}.mask" for d in args.masks] if args.masks else None
        report = (Path(args.report) / f"{wav.stem}.json") if args.report else None
        jobs.append((wav, clean, noise, masks, out_dir / wav.name, report))
    if not jobs:
        raise CliError(1, f"{src}: no .wav files")
    if args.report:
        Path(args.report).mkdir(parents=True, exist_ok=True)
    return jobs


def cmd_enhance(args):
    name = _check_filter(args.filter)
    cfg = _stft_config(args)
    if not Path(args.input).is_dir():
        return _enhance_one(args, cfg, name, args.input, args.clean, args.noise, args.masks,
                            args.out, args.report)

    def run(job):
        try:
            return _enhance_one(args, cfg, name, *job), None
        except CliError as err:
            return err.code, f"{job[0]}: {err}"

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(run, _batch_paths(args)))
    for _, message in results:
        if message:
            print(f"maskbeam: {message}", file=sys.stderr)
    return max(code for code, _ in results)


def cmd_compare(args):
    names = [n for n in (s.strip() for s in args.filters.split(",")) if n]
    if not names:
        raise CliError(2, "empty filter list")
    names = [_check_filter(n) for n in names]
    baseline = _check_filter(args.baseline_filter)
    cfg = _stft_config(args)
    utt = prepare(args, cfg, args.input, args.clean, args.noise, args.masks)

    entries, weights, signals = {}, {}, {}
    for name in dict.fromkeys(names + [baseline]):
        w, out, entry = evaluate(name, utt, args.mu)
        weights[name] = w.weights
        signals[name] = synthesize(out, cfg)
        if name in names:
            entries[name] = entry
    for name in names:
        entries[name]["fv_percent"] = _fv(signals[name], signals[baseline], cfg, args.states, args.seed)

    def ranked(key, reverse):
        scored = [(e[key], n) for n, e in entries.items() if e.get(key) is not None]
        return [n for _, n in sorted(scored, reverse=reverse)]

    extra = {"filters": names, "baseline_filter": baseline, "input": str(args.input),
             "clean": _str(args.clean), "noise": _str(args.noise),
             "masks": [str(p) for p in args.masks] if args.masks else None}
    payload = _report(
        "compare", args, utt, entries, extra,
        ranking={"output_snr_db": ranked("output_snr_db", True), "sd_mean_db": ranked("sd_mean_db", False)},
        collinearity=_collinearity(weights),
    )
    try:
        if args.outdir:
            os.makedirs(args.outdir, exist_ok=True)
            for name in names:
                write_wav(Path(args.outdir) / f"{name}.wav", signals[name], cfg.sample_rate)
        if args.report:
            _write_json(args.report, payload)
        else:
            print(json.dumps(_clean_json(payload), indent=2, sort_keys=True))
    except OSError as err:
        raise CliError(1, str(err)) from None
    return 0


def _scene_params(args):
    if args.manifest_in:
        try:
            manifest = json.loads(Path(args.manifest_in).read_text())
            return dict(manifest["params"])
        except (OSError, ValueError, KeyError) as err:
            raise CliError(1, f"{args.manifest_in}: unusable manifest ({err})") from None
    return {
        "channels": args.channels,
        "duration": args.duration,
        "snr_db": args.snr,
        "noise_kind": args.noise_kind,
        "geometry": args.geometry,
        "seed": args.seed,
        "fft_size": args.fft_size,
        "hop": args.hop,
    }


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_simulate(args):
    p = _scene_params(args)
    try:
        cfg = StftConfig(fft_size=int(p["fft_size"]), hop=int(p["hop"]), sample_rate=SAMPLE_RATE)
        samples = int(round(float(p["duration"]) * SAMPLE_RATE))
        frames = (samples - cfg.fft_size) // cfg.hop + 1
        if frames < 1:
            raise ValueError(f"duration {p['duration']} s is shorter than one frame")
        if not 1 <= int(p["channels"]) <= 16:
            raise ValueError("channels must lie in [1, 16]")
        scene = generate_scene(channels=int(p["channels"]), bins=cfg.bins, frames=frames,
                               snr_db=float(p["snr_db"]), noise_kind=p["noise_kind"],
                               seed=int(p["seed"]), geometry=p["geometry"])
    except (ValueError, KeyError) as err:
        raise CliError(2, f"invalid scene parameters: {err}") from None
    clean, noise = render_stems(scene, cfg)
    outdir = Path(args.outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        files = {}
        for label, data in (("clean", clean), ("noise", noise), ("mixture", clean + noise)):
            path = outdir / f"{label}.wav"
            write_wav(path, data, cfg.sample_rate)
            files[label] = {"path": path.name, "sha256": _sha256(path)}
        manifest = {
            "schema": MANIFEST_SCHEMA,
            "tool_version": __version__,
            "params": p,
            "samples": int(clean.shape[1]),
            "frames": frames,
            "files": files,
        }
        _write_json(args.manifest or outdir / "manifest.json", manifest)
    except OSError as err:
        raise CliError(1, str(err)) from None
    return 0


def cmd_verify(args):
    if args.scenes < 1:
        raise CliError(2, "--scenes must be at least 1")
    checks = run_checks(scenes=args.scenes, bins=args.fft_size // 2 + 1, seed=args.seed)
    for name, c in checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}: {c['error']:.3e} (tolerance {c['tolerance']:g})")
    if args.report:
        payload = {"schema": REPORT_SCHEMA, "tool": "maskbeam", "tool_version": __version__,
                   "command": "verify",
                   "config": {"scenes": args.scenes, "fft_size": args.fft_size, "seed": args.seed},
                   "checks": checks}
        try:
            _write_json(args.report, payload)
        except OSError as err:
            raise CliError(1, str(err)) from None
    return 0 if all(c["passed"] for c in checks.values()) else 4


# ---------------------------------------------------------------- parser


def _add_stft(p):
    p.add_argument("--fft-size", type=int, default=1024)
    p.add_argument("--hop", type=int, default=256)


def _add_processing(p):
    _add_stft(p)
    p.add_argument("input", help="multichannel WAV (16 kHz, PCM16 or float32)")
    p.add_argument("--mu", type=float, default=None, help="trade-off for vs and parametric filters")
    p.add_argument("--stats", choices=("utterance", "recursive"), default="utterance")
    p.add_argument("--alpha", type=float, default=0.95, help="forgetting factor for recursive stats")
    p.add_argument("--normalize", action="store_true", help="divide statistics by the mask sum")
    p.add_argument("--ref", default="auto", help="'auto' or a channel index")
    p.add_argument("--lcx-db", type=float, default=0.0)
    p.add_argument("--lcn-db", type=float, default=-10.0)
    p.add_argument("--masks", nargs=2, metavar=("SPEECH", "NOISE"), help="mask files")
    p.add_argument("--clean", help="clean speech stem (multichannel WAV)")
    p.add_argument("--noise", help="noise stem (multichannel WAV)")
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--states", type=int, default=DEFAULT_STATES, help="pseudo-state count for FV")
    p.add_argument("--seed", type=int, default=0, help="k-means seed for FV pseudo-states")


def build_parser():
    parser = argparse.ArgumentParser(prog="maskbeam", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"maskbeam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="enhance one recording (or a directory of them)")
    _add_processing(p)
    p.add_argument("--filter", default="r1mwf-mug-gevd", help=f"one of: {', '.join(CATALOGUE)}")
    p.add_argument("--out", required=True, help="enhanced float32 WAV (a directory in batch mode)")
    p.add_argument("--baseline", help="baseline WAV for the FV metric")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="batch-mode workers")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("compare", help="run the filter catalogue on shared statistics")
    _add_processing(p)
    p.add_argument("--filters", default=",".join(CATALOGUE), help="comma-separated variant names")
    p.add_argument("--baseline-filter", default=DEFAULT_BASELINE, help="FV baseline variant")
    p.add_argument("--outdir", help="also write one enhanced WAV per filter here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="render a synthetic scene with exact stems")
    _add_stft(p)
    p.add_argument("--channels", type=int, default=6)
    p.add_argument("--duration", type=float, default=2.0, help="seconds")
    p.add_argument("--snr", type=float, default=0.0, help="channel-0 SNR in dB")
    p.add_argument("--noise-kind", choices=NOISE_KINDS, default="diffuse")
    p.add_argument("--geometry", choices=GEOMETRIES, default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", required=True)
    p.add_argument("--manifest", help="where to write the manifest (default OUTDIR/manifest.json)")
    p.add_argument("--from-manifest", dest="manifest_in", help="replay the parameters of a manifest")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check closed-form filter properties on synthetic scenes")
    p.add_argument("--scenes", type=int, default=20)
    p.add_argument("--fft-size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0, help="seed of the first scene")
    p.add_argument("--report", help="JSON report path")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"maskbeam: error: {err}", file=sys.stderr)
        return err.code
    except (DegenerateStatisticsError, SingularMatrixError) as err:
        print(f"maskbeam: error: {_degenerate(err, 1 << 62)}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
