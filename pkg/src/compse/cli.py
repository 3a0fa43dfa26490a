"""Command-line entry point: corpus synthesis, training, enhancement,
evaluation, and the built-in verification suites.

Every subcommand prints a "resolved config" header to stderr before doing
any work; rerunning with those values reproduces the outputs. Exit codes:
0 success, 1 validation/usage error, 2 runtime or numeric failure.
"""

import argparse
import os
import sys

import numpy as np

from . import gradcheck
from .data import CorpusSpec, generate_corpus, read_manifest, write_corpus
from .errors import (CompseError, ContractError, DegenerateInputError, NumericError,
                     ParseError, ShapeError)
from .losses import relativistic_average_losses, relativistic_d_loss, relativistic_g_adv_loss
from .masking import apply_mask_crm, oracle_crm
from .metrics import log_spectral_distance, metric_report_lines, seg_snr, si_sdr
from .models import DiscriminatorConfig, GeneratorConfig
from .stft import StftConfig, istft, stft
from .trainer import TrainConfig, enhance_utterance, load_models, train_loop
from .wavio import read_wav, write_wav


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _err(msg):
    print(msg, file=sys.stderr)


def build_parser():
    parser = _Parser(prog="compse", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    by_name = {}

    def sub(name, **kw):
        p = subs.add_parser(name, **kw)
        p.add_argument("--config", default=None,
                       help="flat key = value file; flags override it")
        by_name[name] = p
        return p

    p = sub("synth-data", help="generate the synthetic corpus + manifests")
    p.add_argument("--out", required=True)
    p.add_argument("--n-train", type=int, default=200)
    p.add_argument("--n-test", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)

    p = sub("train", help="train generator and discriminator from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask", choices=("crm", "polar", "real"), default="crm")
    p.add_argument("--recurrent", choices=("lstm", "clstm", "cblstm"), default="lstm")
    p.add_argument("--loss", choices=("r", "ra"), default="r")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--lambda-l1", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", choices=("paper", "toy"), default="paper")

    p = sub("enhance", help="enhance one WAV file with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="in_path", required=True, metavar="WAV")
    p.add_argument("--out", required=True, metavar="WAV")

    p = sub("evaluate", help="metric report over a manifest's utterances")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", required=True)

    p = sub("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--module", default=None, choices=sorted(gradcheck.CHECKS))

    sub("selftest", help="oracle-mask, round-trip, and loss-identity checks")

    return parser, by_name


def _load_config_file(path, parser_for_cmd):
    """Apply flat key = value defaults; command-line flags still win."""
    actions = {}
    for action in parser_for_cmd._actions:
        for opt in action.option_strings:
            actions[opt.lstrip("-")] = action
    try:
        with open(path) as fh:
            lines = list(fh)
    except OSError as exc:
        raise ContractError(f"cannot read config file: {exc}") from exc
    defaults = {}
    for ln, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{ln}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "config":
            raise ContractError(f"{path}:{ln}: config files cannot nest")
        action = actions.get(key)
        if action is None:
            raise ContractError(f"{path}:{ln}: unknown key {key!r}")
        try:
            parsed = action.type(value) if action.type else value
        except ValueError as exc:
            raise ParseError(f"{path}:{ln}: bad value for {key!r}: {exc}") from exc
        if action.choices and parsed not in action.choices:
            raise ContractError(
                f"{path}:{ln}: {key!r} must be one of {sorted(action.choices)}")
        defaults[action.dest] = parsed
    parser_for_cmd.set_defaults(**defaults)


def _print_resolved(args):
    skip = {"command", "config"}
    _err("resolved config:")
    for dest, value in sorted(vars(args).items()):
        if dest in skip:
            continue
        name = "in" if dest == "in_path" else dest.replace("_", "-")
        _err(f"  {name} = {value}")


def cmd_synth_data(args):
    spec = CorpusSpec(n_train=args.n_train, n_test=args.n_test, seed=args.seed)
    train, test = generate_corpus(spec)
    os.makedirs(args.out, exist_ok=True)
    write_corpus(train, os.path.join(args.out, "train"),
                 os.path.join(args.out, "train_manifest.tsv"))
    write_corpus(test, os.path.join(args.out, "test"),
                 os.path.join(args.out, "test_manifest.tsv"))
    _err(f"wrote {len(train)} train / {len(test)} test utterances under {args.out}")
    return 0


def _model_configs(scale, mask, recurrent):
    if scale == "toy":
        return (GeneratorConfig.toy_scale(mask_mode=mask, recurrent_kind=recurrent),
                DiscriminatorConfig.toy_scale())
    return (GeneratorConfig.paper_scale(mask_mode=mask, recurrent_kind=recurrent),
            DiscriminatorConfig.paper_scale())


def cmd_train(args):
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr,
                      lambda_l1=args.lambda_l1, loss_kind=args.loss, seed=args.seed)
    gen_cfg, disc_cfg = _model_configs(args.scale, args.mask, args.recurrent)
    utts = read_manifest(args.manifest)
    report_path = os.path.join(args.out, "train_report.tsv")
    os.makedirs(args.out, exist_ok=True)
    _, _, _, ckpt = train_loop(utts, cfg, gen_cfg, disc_cfg, args.out,
                               log=_err, report_path=report_path)
    _err(f"final checkpoint: {ckpt}")
    _err(f"train report: {report_path}")
    return 0


def cmd_enhance(args):
    from .checkpoint import load_checkpoint
    gen, _, _, _ = load_models(load_checkpoint(args.checkpoint))
    gen.eval()
    noisy, _ = read_wav(args.in_path)
    write_wav(args.out, enhance_utterance(gen, noisy))
    _err(f"enhanced {args.in_path} -> {args.out} ({len(noisy)} samples)")
    return 0


def cmd_evaluate(args):
    from .checkpoint import load_checkpoint
    gen, _, gen_cfg, _ = load_models(load_checkpoint(args.checkpoint))
    gen.eval()
    utts = read_manifest(args.manifest)
    if not utts:
        raise ContractError("manifest lists no utterances")
    rows = []
    by_snr = {}
    for utt in utts:
        enhanced = enhance_utterance(gen, utt.noisy)
        scores = {
            "si_sdr": si_sdr(enhanced, utt.clean),
            "seg_snr": seg_snr(enhanced, utt.clean),
            "lsd": log_spectral_distance(enhanced, utt.clean, gen_cfg.stft),
            "si_sdr_noisy": si_sdr(utt.noisy, utt.clean),
        }
        for metric, value in scores.items():
            rows.append((utt.id, metric, value))
            by_snr.setdefault((utt.snr_db, metric), []).append(value)
    for (snr, metric), values in sorted(by_snr.items()):
        rows.append((f"snr_{snr:g}", f"{metric}_mean", float(np.mean(values))))
    for metric in ("si_sdr", "seg_snr", "lsd", "si_sdr_noisy"):
        values = [v for (s, m), vs in by_snr.items() if m == metric for v in vs]
        rows.append(("all", f"{metric}_mean", float(np.mean(values))))
    with open(args.report, "w") as fh:
        fh.write("\n".join(metric_report_lines(rows)) + "\n")
    _err(f"evaluated {len(utts)} utterances -> {args.report}")
    return 0


def cmd_gradcheck(args):
    ok_all = True
    for name, err, ok in gradcheck.run(args.module):
        _err(f"gradcheck {name}: max rel err {err:.3e} "
             f"[{'pass' if ok else 'FAIL'}]")
        ok_all = ok_all and ok
    if not ok_all:
        raise NumericError("gradient check failed")
    return 0


def _selftest_checks():
    rng = np.random.default_rng(123)
    cfg = StftConfig.toy_scale()
    x = 0.5 * rng.standard_normal(16000)
    rt_err = float(np.max(np.abs(istft(stft(x, cfg), cfg, len(x)) - x)))
    yield "stft round trip", rt_err, rt_err < 1e-6

    clean = 0.4 * np.sin(2 * np.pi * 220.0 * np.arange(16000) / 16000.0)
    noisy = clean + 0.2 * rng.standard_normal(16000)
    X, Y = stft(noisy, cfg), stft(clean, cfg)
    est = apply_mask_crm(X, oracle_crm(X, Y))
    score = si_sdr(istft(est, cfg, 16000), clean)
    yield "oracle mask SI-SDR", score, score >= 60.0

    z = rng.standard_normal((5, 1))
    eq = abs(float(relativistic_d_loss(z, z).data) - np.log(2.0))
    yield "equal-score loss = log 2", eq, eq < 1e-10
    a, b = rng.standard_normal((1, 1)), rng.standard_normal((1, 1))
    g_ra, _ = relativistic_average_losses(a, b)
    doubling = abs(float(g_ra.data) - 2.0 * float(relativistic_g_adv_loss(a, b).data))
    yield "batch-1 Ra = 2 R", doubling, doubling < 1e-10
    shift = abs(float(relativistic_d_loss(z + 17.0, z * 0 + 17.0).data) -
                float(relativistic_d_loss(z, z * 0).data))
    yield "shift invariance", shift, shift < 1e-10


def cmd_selftest(args):
    ok_all = True
    for name, value, ok in _selftest_checks():
        _err(f"selftest {name}: {value:.6g} [{'pass' if ok else 'FAIL'}]")
        ok_all = ok_all and ok
    if not ok_all:
        raise NumericError("selftest failed")
    return 0


_HANDLERS = {
    "synth-data": cmd_synth_data,
    "train": cmd_train,
    "enhance": cmd_enhance,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "selftest": cmd_selftest,
}


def run(argv):
    parser, by_name = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise _UsageError("a subcommand is required")
    if args.config:
        _load_config_file(args.config, by_name[args.command])
        args = parser.parse_args(argv)
    _print_resolved(args)
    return _HANDLERS[args.command](args)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return run(argv)
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except _UsageError as exc:
        _err(f"usage error: {exc}")
        _err("run 'compse --help' for usage")
        return 1
    except (ContractError, ParseError, ShapeError, DegenerateInputError) as exc:
        _err(f"error: {exc}")
        return 1
    except (NumericError, CompseError, OSError) as exc:
        _err(f"runtime error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
