"""Command-line front end: keygen, seal, unseal, scan, eval, train, report.

Every run prints a reproducibility header to stderr (tool and library
versions, seeds, SHA-256 digests of file inputs, and the fresh salt/iv of a
seal) followed by a machine-readable status line. Exit codes are a stable
contract:

    0  ok                      6  padding corrupt (internal)
    2  usage error             7  unreadable or undecodable input file
    3  invalid input           8  eva judgment failed
    4  key mismatch            9  scan exhausted without a match
    5  container tampered     10  training diverged
                              11  refused: executable payload without opt-in

Destructive overwrites always require --force. Sealing a payload that looks
executable requires --i-understand-research-use; the default payload is a
benign text message.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .core import DiscriminatorId, EnvsealError, KeyMaterial, ValidationError
from .corpus import CorpusError, evaluate_corpus, load_corpus, split
from .discriminators import build_discriminator
from .evaluator import THRESHOLD_PROFILES, EvaReport, EvaThresholds
from .exact import HashAlgo, ValueTransferInput, derive_key_hash, derive_key_value_transfer
from .images import ImageDecodeError, decode_image
from .phash import derive_key_phash
from .sealer import (
    CipherSuite,
    ContainerFormatError,
    KeyMismatchError,
    MacMismatchError,
    PadCorruptError,
    SealedContainer,
    seal,
    unseal,
)
from .scanner import CandidateSource, SourceKind, scan

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_KEY_MISMATCH = 4
EXIT_MAC_MISMATCH = 5
EXIT_PAD_CORRUPT = 6
EXIT_IO = 7
EXIT_EVAL_FAILED = 8
EXIT_NO_MATCH = 9
EXIT_TRAIN_DIVERGED = 10
EXIT_REFUSED = 11

STATUS_NAMES = {
    EXIT_OK: "ok",
    EXIT_USAGE: "usage",
    EXIT_VALIDATION: "invalid-input",
    EXIT_KEY_MISMATCH: "key-mismatch",
    EXIT_MAC_MISMATCH: "mac-mismatch",
    EXIT_PAD_CORRUPT: "pad-corrupt",
    EXIT_IO: "io-error",
    EXIT_EVAL_FAILED: "eva-failed",
    EXIT_NO_MATCH: "no-match",
    EXIT_TRAIN_DIVERGED: "train-diverged",
    EXIT_REFUSED: "refused",
}

DEFAULT_PAYLOAD = (
    b"envseal demonstration payload: benign text sealed for key-derivation research.\n"
)

CORPUS_ROOT_ENV = "ENVSEAL_CORPUS_ROOT"


class Refused(EnvsealError):
    """The research-use guardrail declined to proceed."""


def _header(lines: list[str]) -> None:
    import numpy

    print(
        f"# envseal {__version__} python={sys.version.split()[0]} numpy={numpy.__version__}",
        file=sys.stderr,
    )
    for line in lines:
        print(f"# {line}", file=sys.stderr)


def _digest_line(role: str, path: Path, data: bytes) -> str:
    return f"input {role}={path} sha256:{hashlib.sha256(data).hexdigest()}"


def _resolve(path: str) -> Path:
    """Relative paths resolve against $ENVSEAL_CORPUS_ROOT when it is set."""
    p = Path(path)
    root = os.environ.get(CORPUS_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _read_input(role: str, path_str: str, header: list[str]) -> bytes:
    path = _resolve(path_str)
    data = path.read_bytes()
    header.append(_digest_line(role, path, data))
    return data


def _write_output(path_str: str, data: bytes, force: bool) -> Path:
    path = Path(path_str)
    if path.exists() and not force:
        raise ValidationError(f"{path} exists; pass --force to overwrite")
    path.write_bytes(data)
    return path


def _looks_executable(path: Path, data: bytes) -> bool:
    if path.is_file() and path.stat().st_mode & 0o111:
        return True
    return data[:2] == b"MZ" or data[:4] == b"\x7fELF" or data[:2] == b"#!"


def _add_method_flags(parser: argparse.ArgumentParser, *, required: bool = True) -> None:
    parser.add_argument("--method", choices=["vt", "hash", "bdnn", "phash"], required=required)
    parser.add_argument("--ssid", help="value-transfer SSID text")
    parser.add_argument("--guid", help="value-transfer GUID text")
    parser.add_argument("--algo", default="sha256", choices=[a.value for a in HashAlgo])
    parser.add_argument("--file", help="target file for the hash method")
    parser.add_argument("--image", help="target image (PGM or PNG)")
    parser.add_argument("--model", help="trained model file for the bdnn method")


def _derive_from_flags(args, header: list[str]) -> KeyMaterial:
    if args.method == "vt":
        if args.ssid is None or args.guid is None:
            raise ValidationError("vt needs --ssid and --guid")
        header.append(f"ssid-octets={len(args.ssid.encode('utf-8'))}")
        return derive_key_value_transfer(ValueTransferInput(args.ssid, args.guid))
    if args.method == "hash":
        if not args.file:
            raise ValidationError("hash needs --file")
        data = _read_input("file", args.file, header)
        return derive_key_hash(data, HashAlgo(args.algo))
    if args.method == "phash":
        if not args.image:
            raise ValidationError("phash needs --image")
        data = _read_input("image", args.image, header)
        return derive_key_phash(decode_image(data, args.image))
    if args.method == "bdnn":
        if not args.model or not args.image:
            raise ValidationError("bdnn needs --model and --image")
        from .bdnn import derive_key_bdnn, load_model

        _read_input("model", args.model, header)
        model = load_model(_resolve(args.model))
        data = _read_input("image", args.image, header)
        return derive_key_bdnn(model, decode_image(data, args.image))
    raise ValidationError(f"unknown method {args.method!r}")


def _key_for_container(args, header: list[str]) -> KeyMaterial:
    if getattr(args, "key_hex", None):
        return KeyMaterial.from_hex(args.key_hex, DiscriminatorId[_METHOD_IDS[args.method]])
    return _derive_from_flags(args, header)


_METHOD_IDS = {
    "vt": "VALUE_TRANSFER",
    "hash": "TYPICAL_HASH",
    "bdnn": "BDNN",
    "phash": "PERCEPTUAL_HASH",
}


def _thresholds_from_flags(args) -> EvaThresholds:
    base = THRESHOLD_PROFILES[args.profile]
    overrides = {}
    for name in "xyzw":
        value = getattr(args, f"threshold_{name}")
        if value is not None:
            overrides[name] = Fraction(value)
    if not overrides:
        return base
    return EvaThresholds(
        x=overrides.get("x", base.x),
        y=overrides.get("y", base.y),
        z=overrides.get("z", base.z),
        w=overrides.get("w", base.w),
    )


def _build_disc_from_flags(args):
    return build_discriminator(
        args.method,
        guid=args.guid,
        algo=args.algo,
        model_path=str(_resolve(args.model)) if args.model else None,
        declared_p_in=Fraction(1, 2 ** args.input_space_log2),
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_keygen(args) -> int:
    header: list[str] = []
    key = _derive_from_flags(args, header)
    _header(header)
    print(f"{key.to_hex()}\t{args.method}")
    return EXIT_OK


def _cmd_seal(args) -> int:
    header: list[str] = []
    if args.payload:
        payload_path = _resolve(args.payload)
        payload = _read_input("payload", args.payload, header)
        if _looks_executable(payload_path, payload) and not args.i_understand_research_use:
            raise Refused(
                f"{payload_path} looks executable; sealing it requires "
                f"--i-understand-research-use (this is a research tool for benign payloads)"
            )
    else:
        payload = DEFAULT_PAYLOAD
        header.append("payload=builtin-demo-text")
    key = _key_for_container(args, header)
    suite = CipherSuite[args.suite.upper() + "_CBC_PKCS7"] if args.suite else None
    container = seal(payload, key, suite)
    header.append(f"salt={container.salt.hex()} iv={container.iv.hex()}")
    _header(header)
    out = _write_output(args.out, container.to_bytes(), args.force)
    print(f"sealed\t{out}\t{len(payload)} bytes")
    return EXIT_OK


def _cmd_unseal(args) -> int:
    header: list[str] = []
    container = SealedContainer.from_bytes(_read_input("container", args.container, header))
    key = _key_for_container(args, header)
    _header(header)
    payload = unseal(container, key)
    out = _write_output(args.out, payload, args.force)
    print(f"unsealed\t{out}\t{len(payload)} bytes")
    return EXIT_OK


def _cmd_scan(args) -> int:
    header: list[str] = []
    container = SealedContainer.from_bytes(_read_input("container", args.container, header))
    disc = _build_disc_from_flags(args)
    source = CandidateSource(
        kind=SourceKind(args.source),
        root=_resolve(args.root),
        limit=args.limit,
        pattern=args.pattern,
    )
    header.append(f"scan root={source.root} pattern={source.pattern} limit={source.limit}")
    _header(header)
    if Path(args.out).exists() and not args.force:
        raise ValidationError(f"{args.out} exists; pass --force to overwrite")
    report = scan(container, source, disc, args.out)
    text = report.to_text()
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK if report.matched else EXIT_NO_MATCH


def _cmd_eval(args) -> int:
    header: list[str] = []
    manifest = _resolve(args.manifest)
    header.append(_digest_line("manifest", manifest, manifest.read_bytes()))
    corpus = load_corpus(manifest)
    header.append(f"corpus seed={corpus.seed} samples={len(corpus.samples)}")
    _header(header)
    disc = _build_disc_from_flags(args)
    report = evaluate_corpus(corpus, disc, _thresholds_from_flags(args), jobs=args.jobs)
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    print(report.to_text(), end="")
    return EXIT_OK if report.passed else EXIT_EVAL_FAILED


def _cmd_train(args) -> int:
    from .bdnn import TrainConfig, save_model, train
    from .discriminators import BdnnDiscriminator

    header: list[str] = []
    manifest = _resolve(args.manifest)
    header.append(_digest_line("manifest", manifest, manifest.read_bytes()))
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        dropout_rate=args.dropout,
        seed=args.seed,
        binarization_penalty=args.penalty,
    )
    header.append(
        f"train epochs={cfg.epochs} batch={cfg.batch_size} lr={cfg.learning_rate} "
        f"dropout={cfg.dropout_rate} penalty={cfg.binarization_penalty} seed={cfg.seed}"
    )
    _header(header)
    corpus = load_corpus(manifest)
    holdout = None
    if args.holdout:
        train_side, holdout = split(corpus, 1.0 - args.holdout, args.seed)
        samples = train_side.samples
    else:
        samples = corpus.samples
    model = train(samples, cfg)
    if Path(args.out).exists() and not args.force:
        raise ValidationError(f"{args.out} exists; pass --force to overwrite")
    save_model(model, args.out)
    print(f"model\t{args.out}\t{Path(args.out).stat().st_size} bytes")
    if holdout is not None:
        disc = BdnnDiscriminator(model, Fraction(1, 2 ** args.input_space_log2))
        report = evaluate_corpus(
            holdout, disc, _thresholds_from_flags(args),
            notes=(f"held-out fraction {args.holdout} of {manifest.name}",),
        )
        if args.report:
            Path(args.report).write_text(report.to_json(), encoding="utf-8")
        print(report.to_text(), end="")
        if not report.passed:
            return EXIT_EVAL_FAILED
    return EXIT_OK


def _cmd_report(args) -> int:
    import json

    record = json.loads(Path(args.record).read_text(encoding="utf-8"))
    report = EvaReport.from_record(record)
    _header([_digest_line("record", Path(args.record), Path(args.record).read_bytes())])
    print(report.to_text(), end="")
    return EXIT_OK if report.passed else EXIT_EVAL_FAILED


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="envseal",
        description="Environmental-keying research toolkit: derive, seal, scan, judge.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("keygen", help="derive a key and print its hex")
    _add_method_flags(p)
    p.set_defaults(fn=_cmd_keygen)

    for name, fn in (("seal", _cmd_seal), ("unseal", _cmd_unseal)):
        p = sub.add_parser(name, help=f"{name} a payload container")
        _add_method_flags(p)
        p.add_argument("--key-hex", help="use this key instead of deriving one")
        p.add_argument("--out", required=True)
        p.add_argument("--force", action="store_true", help="allow overwriting --out")
        if name == "seal":
            p.add_argument("--payload", help="payload file (default: builtin demo text)")
            p.add_argument("--suite", choices=["aes128", "aes256"])
            p.add_argument("--i-understand-research-use", action="store_true")
        else:
            p.add_argument("--container", required=True)
        p.set_defaults(fn=fn)

    p = sub.add_parser("scan", help="sweep candidate attributes at a container")
    _add_method_flags(p)
    p.add_argument("--container", required=True)
    p.add_argument("--source", choices=[k.value for k in SourceKind], required=True)
    p.add_argument("--root", required=True, help="text list file or directory root")
    p.add_argument("--pattern", default="*")
    p.add_argument("--limit", type=int, default=10_000)
    p.add_argument("--out", required=True, help="payload sink on match")
    p.add_argument("--report", help="also write the text report here")
    p.add_argument("--force", action="store_true")
    p.add_argument("--input-space-log2", type=int, default=128)
    p.set_defaults(fn=_cmd_scan)

    p = sub.add_parser("eval", help="judge a discriminator over a labeled corpus")
    _add_method_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--profile", choices=sorted(THRESHOLD_PROFILES), default="exact")
    for t in "xyzw":
        p.add_argument(f"--threshold-{t}", help="override as an exact fraction, e.g. 19/20")
    p.add_argument("--report", help="write the machine-readable record here")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--input-space-log2", type=int, default=128)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("train", help="train the bdnn discriminator on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=45)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--dropout", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--penalty", type=float, default=0.15,
                   help="binarization penalty weight on key-layer activations")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="fraction held out for evaluation after training")
    p.add_argument("--profile", choices=sorted(THRESHOLD_PROFILES), default="learned")
    for t in "xyzw":
        p.add_argument(f"--threshold-{t}")
    p.add_argument("--report", help="write the held-out eva record here")
    p.add_argument("--force", action="store_true")
    p.add_argument("--input-space-log2", type=int, default=128)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("report", help="re-render a machine-readable eva record")
    p.add_argument("--record", required=True)
    p.set_defaults(fn=_cmd_report)
    return parser


_ERROR_CODES = (
    (KeyMismatchError, EXIT_KEY_MISMATCH),
    (MacMismatchError, EXIT_MAC_MISMATCH),
    (PadCorruptError, EXIT_PAD_CORRUPT),
    (Refused, EXIT_REFUSED),
    (ContainerFormatError, EXIT_VALIDATION),
    (ImageDecodeError, EXIT_IO),
    (CorpusError, EXIT_IO),
    (ValidationError, EXIT_VALIDATION),
)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
        _status(code)
        return code
    try:
        code = args.fn(args)
    except EnvsealError as exc:
        code = _classify(exc)
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        code = EXIT_IO
        print(f"error: {exc}", file=sys.stderr)
    _status(code)
    return code


def _classify(exc: EnvsealError) -> int:
    from .bdnn import ModelFileError, NonFiniteLossError

    if isinstance(exc, NonFiniteLossError):
        return EXIT_TRAIN_DIVERGED
    if isinstance(exc, ModelFileError):
        return EXIT_IO
    for cls, code in _ERROR_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_VALIDATION


def _status(code: int) -> None:
    print(f"# status code={code} name={STATUS_NAMES.get(code, 'error')}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
