"""Labeled noisy reverberant corpus synthesis.

Pipeline per item (matching how the evaluation data this estimator targets
was produced): noise is added to the anechoic utterance at an exact SNR
first, and the sum is then convolved with the room impulse response, so the
noise is reverberated too.

Noise kinds are synthetic stand-ins with the right coarse character:
``ambient`` is pink noise from a cascaded first-order IIR approximation,
``fan`` is pink noise low-passed at 500 Hz, and ``babble`` sums four
amplitude-modulated speech-shaped noise sources (real speech buffers can be
supplied instead). All are unit RMS before SNR scaling.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, fftconvolve, lfilter

from .acoustics import Rir, compute_drr, estimate_t60_from_edc, schroeder_edc
from .audio_io import SAMPLE_RATE, AudioBuffer, write_wav_pcm16
from .grid import ClassGrid, ClassVocabulary, build_vocabulary, cell_of

NOISE_KINDS = ("ambient", "babble", "fan", "none")

# Matched-z pole/zero corner frequencies (Hz) for the pink (-3 dB/octave)
# approximation; each zero sits sqrt(10) above its pole, pairs one decade
# apart, giving -10 dB/decade with small ripple across 20 Hz .. 8 kHz.
_PINK_POLES_HZ = (12.0, 120.0, 1200.0, 6000.0)
_PINK_ZEROS_HZ = (37.9, 379.0, 3795.0, 18974.0)

_WARMUP_S = 0.5


@dataclass
class CorpusItem:
    path: str | None
    buffer: AudioBuffer | None
    rir_id: int
    noise_kind: str
    snr_db: float | None
    t60: float
    drr: float
    class_id: int


@dataclass
class CorpusManifest:
    items: list
    grid: ClassGrid
    vocabulary: ClassVocabulary
    seed: int


def convolve(speech: AudioBuffer, rir: Rir) -> AudioBuffer:
    """Full linear convolution; output length N + L - 1."""
    if speech.sample_rate != rir.taps.sample_rate:
        raise ValueError(
            f"sample rate mismatch: speech {speech.sample_rate} Hz, rir {rir.taps.sample_rate} Hz"
        )
    wet = fftconvolve(speech.samples, rir.taps.samples)
    return AudioBuffer(wet, speech.sample_rate)


def _pink(n: int, rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    warmup = int(_WARMUP_S * sample_rate)
    x = rng.standard_normal(n + warmup)
    for fp, fz in zip(_PINK_POLES_HZ, _PINK_ZEROS_HZ):
        rp = np.exp(-2.0 * np.pi * fp / sample_rate)
        rz = np.exp(-2.0 * np.pi * fz / sample_rate)
        x = lfilter([1.0, -rz], [1.0, -rp], x)
    return x[warmup:]


def _unit_rms(x: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(x**2))
    if rms <= 0.0:
        raise ValueError("cannot normalize an all-zero signal")
    return x / rms


def _babble_source(n: int, rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    warmup = int(_WARMUP_S * sample_rate)
    nyq = sample_rate / 2.0
    carrier = lfilter(*butter(1, 500.0 / nyq, btype="low"), rng.standard_normal(n + warmup))
    syllabic = lfilter(*butter(2, 3.5 / nyq, btype="low"), rng.standard_normal(n + warmup))
    return (carrier * np.abs(syllabic))[warmup:]


def gen_noise(
    kind: str,
    duration: float,
    seed,
    sample_rate: int = SAMPLE_RATE,
    babble_sources=None,
) -> AudioBuffer:
    """Generate ``duration`` seconds of unit-RMS noise, deterministic per seed.

    For babble, ``babble_sources`` (a list of AudioBuffer, e.g. real speech)
    overrides the synthetic sources; they are tiled/truncated to length.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    if kind == "ambient":
        x = _pink(n, rng, sample_rate)
    elif kind == "fan":
        pink = _pink(n, rng, sample_rate)
        x = lfilter(*butter(4, 500.0 / (sample_rate / 2.0), btype="low"), pink)
    elif kind == "babble":
        if babble_sources:
            x = np.zeros(n)
            for src in babble_sources:
                reps = int(np.ceil(n / len(src.samples)))
                x += _unit_rms(np.tile(src.samples, reps)[:n])
        else:
            x = sum(_babble_source(n, rng, sample_rate) for _ in range(4))
    else:
        raise ValueError(f"unknown noise kind {kind!r}, expected one of {NOISE_KINDS[:3]}")
    return AudioBuffer(_unit_rms(x), sample_rate)


def mix_at_snr(signal: AudioBuffer, noise: AudioBuffer, snr: float) -> AudioBuffer:
    """Add noise scaled so the full-signal mean-square SNR is exactly ``snr`` dB."""
    if len(noise) < len(signal):
        raise ValueError(f"noise ({len(noise)} samples) shorter than signal ({len(signal)})")
    sig = signal.samples
    nse = noise.samples[: len(sig)]
    p_sig = np.mean(sig**2)
    p_noise = np.mean(nse**2)
    if p_sig <= 0.0 or p_noise <= 0.0:
        raise ValueError("signal and noise must both have nonzero power")
    scale = np.sqrt(p_sig / (p_noise * 10.0 ** (snr / 10.0)))
    return AudioBuffer(sig + scale * nse, signal.sample_rate)


def make_speech_like(duration: float, seed, sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    """Synthetic speech-like utterance: a drifting harmonic voice with two
    random formant emphases, syllabic (~4 Hz) amplitude modulation and a
    faint broadband floor. Deterministic per seed; peak-normalized to 0.5.

    Stands in for recorded speech in desk-scale experiments.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    nyq = sample_rate / 2.0

    f0 = rng.uniform(105.0, 225.0)
    drift = lfilter(*butter(2, 2.0 / nyq, btype="low"), rng.standard_normal(n))
    drift = drift / (np.abs(drift).max() + 1e-12)
    inst_f0 = f0 * (1.0 + 0.06 * drift)
    phase = 2.0 * np.pi * np.cumsum(inst_f0) / sample_rate

    formants = rng.uniform((300.0, 900.0), (800.0, 2400.0))
    voiced = np.zeros(n)
    for h in range(1, int(4000.0 / f0) + 1):
        fh = h * f0
        gain = 1.0 / h
        gain *= 1.0 + 2.0 * np.exp(-0.5 * ((fh - formants[0]) / 150.0) ** 2)
        gain *= 1.0 + 1.5 * np.exp(-0.5 * ((fh - formants[1]) / 250.0) ** 2)
        voiced += gain * np.sin(h * phase + rng.uniform(0.0, 2.0 * np.pi))

    syllabic = lfilter(*butter(2, 4.0 / nyq, btype="low"), rng.standard_normal(n))
    envelope = np.abs(syllabic) / (np.abs(syllabic).max() + 1e-12)
    # clip weak stretches to silence so utterances have real pauses
    envelope = np.maximum(envelope - 0.2, 0.0)
    x = voiced * envelope + 0.003 * rng.standard_normal(n)
    return AudioBuffer(0.5 * x / (np.abs(x).max() + 1e-12), sample_rate)


def _render_item(utt: AudioBuffer, rir: Rir, kind: str, snr, child_seed) -> AudioBuffer:
    if kind == "none":
        mixed = utt
    else:
        noise = gen_noise(kind, duration=len(utt) / utt.sample_rate, seed=child_seed)
        mixed = mix_at_snr(utt, noise, snr)
    wet = convolve(mixed, rir)
    peak = np.abs(wet.samples).max()
    if peak > 0.99:
        wet = AudioBuffer(wet.samples * (0.99 / peak), wet.sample_rate)
    return wet


def build_corpus(
    speech,
    rirs,
    noise_kinds,
    snrs,
    grid: ClassGrid,
    seed: int,
    out_dir=None,
    jobs: int = 1,
) -> CorpusManifest:
    """Assemble the labeled corpus: every utterance crossed with every
    (noise kind, SNR) condition, RIRs assigned circularly by utterance index.

    Each item is labeled with its RIR's analyzed ground truth and the
    matching vocabulary class id. With ``out_dir`` set, items are written as
    16-bit PCM WAVs next to a ``manifest.csv``; otherwise buffers are kept
    in memory. Item rendering parallelizes over ``jobs`` workers; outputs
    are identical for any job count because every item's noise seed is
    pre-assigned.
    """
    speech = list(speech)
    rirs = list(rirs)
    if not speech or not rirs:
        raise ValueError("need at least one utterance and one RIR")
    kinds = list(noise_kinds) if noise_kinds else ["none"]
    snr_list = [float(s) for s in snrs] if snrs else []
    conditions = []
    for kind in kinds:
        if kind == "none":
            conditions.append(("none", None))
        elif not snr_list:
            raise ValueError(f"noise kind {kind!r} requires at least one SNR")
        else:
            conditions.extend((kind, snr) for snr in snr_list)

    truths = [(estimate_t60_from_edc(schroeder_edc(r)), compute_drr(r)) for r in rirs]
    vocabulary = build_vocabulary(grid, truths)

    children = np.random.SeedSequence(seed).spawn(len(speech) * len(conditions))
    tasks = []
    for i in range(len(speech)):
        rir_id = i % len(rirs)
        for kind, snr in conditions:
            tasks.append((i, rir_id, kind, snr, children[len(tasks)]))

    def render(task):
        i, rir_id, kind, snr, child = task
        return _render_item(speech[i], rirs[rir_id], kind, snr, child)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rendered = list(pool.map(render, tasks))
    else:
        rendered = [render(task) for task in tasks]

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    items = []
    for (i, rir_id, kind, snr, _), wet in zip(tasks, rendered):
        t60, drr = truths[rir_id]
        class_id = vocabulary.class_id_of(cell_of(grid, t60, drr))
        path = None
        buffer = wet
        if out_dir is not None:
            path = f"item_{len(items):05d}.wav"
            write_wav_pcm16(os.path.join(out_dir, path), wet)
            buffer = None
        items.append(CorpusItem(path, buffer, rir_id, kind, snr, t60, drr, class_id))

    manifest = CorpusManifest(items, grid, vocabulary, seed)
    if out_dir is not None:
        write_manifest_csv(manifest, os.path.join(out_dir, "manifest.csv"))
    return manifest


MANIFEST_COLUMNS = ("path", "rir_id", "noise_kind", "snr_db", "t60_s", "drr_db", "class_id")


def write_manifest_csv(manifest: CorpusManifest, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for item in manifest.items:
            writer.writerow(
                [
                    item.path or "",
                    item.rir_id,
                    item.noise_kind,
                    "" if item.snr_db is None else f"{item.snr_db:g}",
                    f"{item.t60:.6f}",
                    f"{item.drr:.6f}",
                    item.class_id,
                ]
            )


def read_manifest_items(path) -> list:
    """Read manifest.csv rows back as CorpusItems; relative audio paths are
    resolved against the manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    items = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: manifest missing columns {sorted(missing)}")
        for row in reader:
            audio_path = row["path"]
            if audio_path and not os.path.isabs(audio_path):
                audio_path = os.path.join(base, audio_path)
            items.append(
                CorpusItem(
                    path=audio_path or None,
                    buffer=None,
                    rir_id=int(row["rir_id"]),
                    noise_kind=row["noise_kind"],
                    snr_db=float(row["snr_db"]) if row["snr_db"] else None,
                    t60=float(row["t60_s"]),
                    drr=float(row["drr_db"]),
                    class_id=int(row["class_id"]),
                )
            )
    return items
