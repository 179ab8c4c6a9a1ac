"""Labeled attribute corpora: loading, splitting, and evaluation.

Manifest format, one entry per line, tab-separated, ``#`` comments allowed:

    seed	42
    positive	text:CORP-WIFI-5G
    negative	file:decoys/report.bin
    positive	image:targets/icon.pgm

The first data line declares the shuffle seed; every other line is
``label<TAB>kind:payload`` where label is positive/negative/unlabeled and
kind is text (literal), file, or image (paths relative to the manifest).
Labels come only from the manifest, never from content. Sample order is the
seeded shuffle of line order, so two loads are identical.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .core import AttributeSample, EnvsealError, Label, SampleKind, ValidationError
from .discriminators import Discriminator
from .evaluator import EvaReport, EvaThresholds, KeyHistogram, judge, p_acc, p_out, p_sta
from .images import decode_image

__all__ = ["Corpus", "CorpusError", "load_corpus", "split", "evaluate_corpus"]


class CorpusError(EnvsealError):
    pass


@dataclass(frozen=True)
class Corpus:
    samples: tuple[AttributeSample, ...]
    seed: int
    manifest_path: str = ""

    def by_label(self, label: Label) -> tuple[AttributeSample, ...]:
        return tuple(s for s in self.samples if s.label is label)


_KINDS = {"text": SampleKind.TEXT, "file": SampleKind.FILE, "image": SampleKind.IMAGE}
_LABELS = {l.value: l for l in Label}


def load_corpus(manifest_path: str | Path) -> Corpus:
    manifest_path = Path(manifest_path)
    try:
        lines = manifest_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read manifest {manifest_path}: {exc}") from exc

    seed: int | None = None
    samples: list[AttributeSample] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        head, _, rest = line.partition("\t")
        if seed is None:
            if head != "seed":
                raise CorpusError(f"{manifest_path}:{lineno}: first entry must be 'seed<TAB>N'")
            try:
                seed = int(rest)
            except ValueError:
                raise CorpusError(f"{manifest_path}:{lineno}: bad seed {rest!r}") from None
            continue
        if head not in _LABELS:
            raise CorpusError(f"{manifest_path}:{lineno}: unknown label {head!r}")
        kind_name, sep, payload = rest.partition(":")
        if not sep or kind_name not in _KINDS:
            raise CorpusError(
                f"{manifest_path}:{lineno}: entry must be text:/file:/image:, got {rest!r}"
            )
        samples.append(
            _load_sample(_KINDS[kind_name], payload, _LABELS[head], manifest_path, lineno)
        )
    if seed is None:
        raise CorpusError(f"{manifest_path}: missing seed line")
    random.Random(seed).shuffle(samples)
    return Corpus(tuple(samples), seed, str(manifest_path))


def _load_sample(
    kind: SampleKind, payload: str, label: Label, manifest_path: Path, lineno: int
) -> AttributeSample:
    if kind is SampleKind.TEXT:
        return AttributeSample(
            kind, payload.encode("utf-8"), label, f"{manifest_path.name}:{lineno:06d}"
        )
    path = manifest_path.parent / payload
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CorpusError(f"{manifest_path}:{lineno}: cannot read {path}: {exc}") from exc
    sample = AttributeSample(kind, data, label, payload)
    if kind is SampleKind.IMAGE:
        decode_image(data, payload)  # validate now: a bad image fails the whole load
    return sample


def split(corpus: Corpus, train_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Disjoint, label-stratified, seed-deterministic train/test split."""
    if not 0 < train_fraction < 1:
        raise ValidationError(f"train fraction {train_fraction} must lie in (0, 1)")
    rng = random.Random(seed)
    train: list[AttributeSample] = []
    test: list[AttributeSample] = []
    for label in Label:
        group = list(corpus.by_label(label))
        if not group:
            continue
        rng.shuffle(group)
        n_train = int(train_fraction * len(group) + 0.5)
        train.extend(group[:n_train])
        test.extend(group[n_train:])
    if not train or not test:
        raise ValidationError(
            f"fraction {train_fraction} leaves an empty side ({len(train)}/{len(test)})"
        )
    return (
        Corpus(tuple(train), seed, corpus.manifest_path),
        Corpus(tuple(test), seed, corpus.manifest_path),
    )


def evaluate_corpus(
    corpus: Corpus,
    discriminator: Discriminator,
    thresholds: EvaThresholds,
    *,
    jobs: int = 1,
    notes: tuple[str, ...] = (),
) -> EvaReport:
    """Derive a key per sample, histogram by label, and judge the tetrad.

    Per-sample derivation failures never abort the run: the failed sample
    counts as an out-of-band non-key (it can never equal the chosen key)
    and the failure totals appear in the report. Results are independent of
    sample order and of ``jobs``.
    """
    if any(s.label is Label.UNLABELED for s in corpus.samples):
        raise CorpusError("evaluation corpus contains unlabeled samples")
    if not corpus.by_label(Label.POSITIVE) or not corpus.by_label(Label.NEGATIVE):
        raise CorpusError("evaluation corpus needs both positive and negative samples")
    labeled = corpus.samples

    def derive_or_none(sample: AttributeSample):
        try:
            return discriminator.derive(sample)
        except EnvsealError:
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            keys = list(pool.map(derive_or_none, labeled))
    else:
        keys = [derive_or_none(s) for s in labeled]

    hists = {Label.POSITIVE: KeyHistogram(), Label.NEGATIVE: KeyHistogram()}
    failures = {Label.POSITIVE: 0, Label.NEGATIVE: 0}
    for sample, key in zip(labeled, keys):
        if key is None:
            hists[sample.label].add_failure()
            failures[sample.label] += 1
        else:
            hists[sample.label].add(key)

    sta, chosen = p_sta(hists[Label.POSITIVE])
    return judge(
        discriminator.declared_p_in,
        p_out(discriminator.key_width_bits),
        sta,
        p_acc(hists[Label.NEGATIVE], chosen),
        thresholds,
        discriminator=discriminator.id,
        chosen_key=chosen,
        positives=hists[Label.POSITIVE].total,
        negatives=hists[Label.NEGATIVE].total,
        positive_failures=failures[Label.POSITIVE],
        negative_failures=failures[Label.NEGATIVE],
        notes=notes + ("p_sta ties break toward lexicographically smallest key bits",),
    )
