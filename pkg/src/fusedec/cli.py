"""Command line front end.

One binary with subcommands covering the whole pipeline: compile a
pronunciation lexicon, train a language model, synthesize a task, train the
toy attention scorer, decode, sweep fusion weights, and score hypotheses.
Every run writes its primary output plus a manifest recording the command,
the flag values, sha256 digests of the inputs, the seed, and the toolkit
version.  Reruns with the same flags produce byte-identical primary outputs;
manifests differ only in the duration field.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
Configuration comes from flags alone, never from environment variables.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import __version__
from .decoder import (
    DecodeConfig,
    DecodeError,
    DecodeResources,
    FUSION_MODES,
    decode_batch,
)
from .fst import SymbolTable, write_fst_text
from .lexicon import EOW_MODES, compile_lexicon, parse_lexicon
from .ngram import lm_to_fst, read_arpa, train_ngram, write_arpa
from .scorer import (
    ToyLasModel,
    load_checkpoint,
    save_checkpoint,
    train_model,
    write_loss_trace,
)
from .sweep import SWEEP_KINDS, sweep_lmw, write_sweep_csv
from .synth import build_table_scorer, load_task, save_task, synth_corpus, task_alphabet
from .wer import corpus_wer


class UsageError(Exception):
    """Bad flag combination; maps to exit code 2."""


@dataclass
class RunManifest:
    """What gets written next to each command's primary output."""

    path: Path
    command: str
    config: dict
    inputs: Sequence[str | Path]
    seed: int | None

    def write(self, duration: float) -> None:
        digests: dict[str, str] = {}
        for entry in self.inputs:
            entry = Path(entry)
            files = sorted(p for p in entry.rglob("*") if p.is_file()) if entry.is_dir() else [entry]
            for f in files:
                digests[str(f)] = hashlib.sha256(f.read_bytes()).hexdigest()
        payload = {
            "command": self.command,
            "config": self.config,
            "duration_s": duration,
            "inputs": digests,
            "seed": self.seed,
            "version": __version__,
        }
        self.path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config_echo(args: argparse.Namespace) -> dict:
    echo = dict(vars(args))
    echo.pop("func", None)
    echo.pop("command", None)
    return echo


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _cmd_compile_lexicon(args: argparse.Namespace) -> RunManifest:
    phoneset = SymbolTable.read(args.phones) if args.phones else None
    lex = parse_lexicon(_read_text(args.lexicon), phoneset)
    fst = compile_lexicon(lex, args.eow_mode)
    out = Path(args.out)
    write_fst_text(fst, out)
    fst.isyms.write(f"{out}.isyms")
    fst.osyms.write(f"{out}.osyms")
    inputs = [args.lexicon] + ([args.phones] if args.phones else [])
    return RunManifest(Path(f"{out}.manifest.json"), "compile-lexicon", _config_echo(args), inputs, None)


def _cmd_train_lm(args: argparse.Namespace) -> RunManifest:
    sentences = [line.split() for line in _read_text(args.corpus).splitlines() if line.strip()]
    lm = train_ngram(sentences, args.order, args.smoothing, args.discount)
    write_arpa(lm, args.out)
    return RunManifest(Path(f"{args.out}.manifest.json"), "train-lm", _config_echo(args), [args.corpus], None)


def _cmd_synth(args: argparse.Namespace) -> RunManifest:
    lex = parse_lexicon(_read_text(args.lexicon))
    lm = read_arpa(args.lm)
    task = synth_corpus(args.seed, lex, lm, args.count, args.noise)
    save_task(task, args.out)
    return RunManifest(
        Path(args.out) / "manifest.json", "synth", _config_echo(args), [args.lexicon, args.lm], args.seed,
    )


def _cmd_train_scorer(args: argparse.Namespace) -> RunManifest:
    task = load_task(args.task)
    if not task.utterances:
        raise ValueError(f"task {args.task} has no utterances to train on")
    _, utts = build_table_scorer(task)
    feat_dim = utts[0].features.shape[1]
    model = ToyLasModel.init(
        task_alphabet(task), feat_dim,
        enc_hidden=args.enc_hidden, dec_hidden=args.dec_hidden,
        att_dim=args.att_dim, embed_dim=args.embed_dim,
        n_heads=args.heads, n_enc_layers=args.layers, seed=args.seed,
    )
    trace = train_model(model, utts, args.epochs, args.lr, args.optimizer)
    save_checkpoint(model, args.out)
    write_loss_trace(f"{args.out}.loss.csv", trace)
    return RunManifest(Path(f"{args.out}.manifest.json"), "train-scorer", _config_echo(args), [args.task], args.seed)


def _decode_config(args: argparse.Namespace) -> DecodeConfig:
    try:
        return DecodeConfig(
            beam_width=args.beam_width,
            max_steps=args.max_steps,
            fusion=args.fusion,
            lm_weight=args.lm_weight,
            lm_weight_nbest=args.lm_weight_nbest,
            coverage_weight=args.coverage_weight,
            coverage_threshold=args.coverage_threshold,
            eow_mode=args.eow_mode,
            nbest_size=args.nbest,
        )
    except DecodeError as err:
        raise UsageError(str(err)) from err


def _load_resources(args: argparse.Namespace) -> tuple[DecodeResources, list[str]]:
    if args.fusion == "none":
        return DecodeResources(), []
    if not (args.lexicon and args.lm):
        raise UsageError(f"fusion {args.fusion!r} requires --lexicon and --lm")
    lex = parse_lexicon(_read_text(args.lexicon))
    lm = read_arpa(args.lm)
    return DecodeResources(compile_lexicon(lex, args.eow_mode), lm_to_fst(lm)), [args.lexicon, args.lm]


def _task_scorer(args: argparse.Namespace, task):
    if args.scorer:
        model = load_checkpoint(args.scorer)
        _, utts = build_table_scorer(task)
        return model, utts
    return build_table_scorer(task)


def _cmd_decode(args: argparse.Namespace) -> RunManifest:
    config = _decode_config(args)
    resources, resource_inputs = _load_resources(args)
    task = load_task(args.task)
    scorer, utts = _task_scorer(args, task)
    results = decode_batch(scorer, resources, utts, config, jobs=args.jobs)
    text = "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in results)
    Path(args.out).write_text(text, encoding="utf-8")
    inputs = [args.task, *resource_inputs] + ([args.scorer] if args.scorer else [])
    return RunManifest(Path(f"{args.out}.manifest.json"), "decode", _config_echo(args), inputs, None)


def _sweep_grid(args: argparse.Namespace) -> list:
    try:
        values = [float(cell) for cell in args.grid.split(",") if cell.strip()]
    except ValueError as err:
        raise UsageError(f"bad --grid cell: {err}") from err
    if args.which == "split":
        if args.grid_sum is None:
            raise UsageError("--which split requires --grid-sum")
        return [(v, args.grid_sum - v) for v in values]
    if args.grid_sum is not None:
        raise UsageError("--grid-sum only applies to --which split")
    return values


def _cmd_sweep(args: argparse.Namespace) -> RunManifest:
    grid = _sweep_grid(args)
    try:
        config = DecodeConfig(
            beam_width=args.beam_width,
            max_steps=args.max_steps,
            coverage_threshold=args.coverage_threshold,
            eow_mode=args.eow_mode,
            nbest_size=args.nbest,
        )
    except DecodeError as err:
        raise UsageError(str(err)) from err
    lex = parse_lexicon(_read_text(args.lexicon))
    lm = read_arpa(args.lm)
    resources = DecodeResources(compile_lexicon(lex, args.eow_mode), lm_to_fst(lm))
    task = load_task(args.task)
    result = sweep_lmw(task, resources, config, grid, args.which, jobs=args.jobs)
    write_sweep_csv(result, args.out)
    inputs = [args.task, args.lexicon, args.lm]
    return RunManifest(Path(f"{args.out}.manifest.json"), "sweep", _config_echo(args), inputs, None)


def _cmd_score(args: argparse.Namespace) -> RunManifest:
    task = load_task(args.task)
    refs = {utt.uid: utt.words for utt in task.utterances}
    pairs = []
    for line in _read_text(args.results).splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        uid = record["uid"]
        if uid not in refs:
            raise ValueError(f"results mention {uid!r} which is not in the task")
        pairs.append((refs[uid], record["words"]))
    breakdown = corpus_wer(pairs)
    payload = {
        "deletions": breakdown.deletions,
        "insertions": breakdown.insertions,
        "substitutions": breakdown.substitutions,
        "ref_count": breakdown.ref_count,
        "utterances": len(pairs),
        "wer": breakdown.wer,
    }
    Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(
        f"wer {breakdown.wer:.6f} over {len(pairs)} utterances "
        f"(del {breakdown.deletions} ins {breakdown.insertions} "
        f"sub {breakdown.substitutions} / {breakdown.ref_count} ref words)"
    )
    return RunManifest(Path(f"{args.out}.manifest.json"), "score", _config_echo(args), [args.task, args.results], None)


def _add_decode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beam-width", type=int, default=8, help="live hypotheses kept per step")
    p.add_argument("--nbest", type=int, default=8, help="ranked hypotheses reported per utterance")
    p.add_argument("--max-steps", type=int, default=64, help="token-length cap per utterance")
    p.add_argument("--eow-mode", choices=EOW_MODES, default="required",
                   help="whether word boundaries must be emitted")
    p.add_argument("--coverage-threshold", type=float, default=0.5,
                   help="attention mass for a frame to count as covered")
    p.add_argument("--jobs", type=int, default=1, help="worker threads (1 keeps runs bitwise reproducible)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusedec",
        description="Lexicon-constrained beam search with n-gram fusion for toy attention scorers.",
    )
    parser.add_argument("--version", action="version", version=f"fusedec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("compile-lexicon", help="build the pronunciation transducer")
    p.add_argument("--lexicon", required=True, help="word<TAB>phones file")
    p.add_argument("--phones", help="optional phone symbol table; derived from the lexicon when absent")
    p.add_argument("--eow-mode", choices=EOW_MODES, default="required",
                   help="whether word boundaries must be emitted")
    p.add_argument("--out", required=True, help="output FST path (text format; .isyms/.osyms written beside)")
    p.set_defaults(func=_cmd_compile_lexicon)

    p = sub.add_parser("train-lm", help="estimate a backoff n-gram model")
    p.add_argument("--corpus", required=True, help="text file, one sentence per line")
    p.add_argument("--order", type=int, default=2, help="model order, 1 to 4")
    p.add_argument("--smoothing", choices=("mle", "absdisc"), default="absdisc")
    p.add_argument("--discount", type=float, default=0.4, help="absolute discount amount")
    p.add_argument("--out", required=True, help="output ARPA path")
    p.set_defaults(func=_cmd_train_lm)

    p = sub.add_parser("synth", help="sample a synthetic decoding task")
    p.add_argument("--lexicon", required=True, help="word<TAB>phones file")
    p.add_argument("--lm", required=True, help="ARPA model to sample sentences from")
    p.add_argument("--count", type=int, required=True, help="number of utterances")
    p.add_argument("--noise", type=float, default=0.0, help="phone confusion and feature noise rate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output task directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train-scorer", help="fit the toy attention scorer on a task")
    p.add_argument("--task", required=True, help="task directory from synth")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default="adam")
    p.add_argument("--enc-hidden", type=int, default=16)
    p.add_argument("--dec-hidden", type=int, default=16)
    p.add_argument("--att-dim", type=int, default=8)
    p.add_argument("--embed-dim", type=int, default=8)
    p.add_argument("--heads", type=int, default=1)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output checkpoint path (.loss.csv written beside)")
    p.set_defaults(func=_cmd_train_scorer)

    p = sub.add_parser("decode", help="decode a task and write ranked hypotheses")
    p.add_argument("--task", required=True, help="task directory from synth")
    p.add_argument("--scorer", help="checkpoint from train-scorer; defaults to the task's emission table")
    p.add_argument("--fusion", choices=FUSION_MODES, default="none")
    p.add_argument("--lexicon", help="word<TAB>phones file; required for fused modes")
    p.add_argument("--lm", help="ARPA model; required for fused modes")
    p.add_argument("--lm-weight", type=float, default=0.0, help="in-search language model weight")
    p.add_argument("--lm-weight-nbest", type=float, default=None, help="rescoring language model weight")
    p.add_argument("--coverage-weight", type=float, default=0.0)
    _add_decode_flags(p)
    p.add_argument("--out", required=True, help="output JSONL path, one result per utterance")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("sweep", help="decode a task across a weight grid and write the WER curve")
    p.add_argument("--task", required=True, help="task directory from synth")
    p.add_argument("--lexicon", required=True, help="word<TAB>phones file")
    p.add_argument("--lm", required=True, help="ARPA model")
    p.add_argument("--which", choices=SWEEP_KINDS, required=True,
                   help="where the swept weight applies")
    p.add_argument("--grid", required=True, help="comma-separated weights, e.g. 0,0.02,0.04")
    p.add_argument("--grid-sum", type=float, default=None,
                   help="constant lambda_beam + lambda_nbest for --which split")
    _add_decode_flags(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("score", help="score decode output against a task's references")
    p.add_argument("--task", required=True, help="task directory holding the references")
    p.add_argument("--results", required=True, help="JSONL from decode")
    p.add_argument("--out", required=True, help="output JSON path with the error breakdown")
    p.set_defaults(func=_cmd_score)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    start = time.monotonic()
    try:
        manifest = args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    manifest.write(time.monotonic() - start)
    return 0


if __name__ == "__main__":
    sys.exit(main())
