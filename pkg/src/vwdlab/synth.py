"""Deterministic synthetic ventilator-flow cohorts with a planted spectral class signal.

Each breath is a half-sine inspiration followed by a bi-exponential expiration whose volume
matches the inspired volume. A planted class additionally carries, in every breath, a
Hann-windowed tone burst at a random in-band frequency and phase. By default the burst sits
in early expiration, where flow stays below ``-(amplitude + onset_threshold)``; the
``inspiration`` placement spans the whole inspiratory half-sine instead (used for slow,
shape-changing plants). Neither placement creates or removes inhalation onsets.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .cohort import SAMPLE_RATE_HZ, CohortManifest, FlowSeries, Label, ManifestEntry, write_flow_series, write_manifest
from .errors import ConfigInvalid


@dataclass(frozen=True)
class BreathParams:
    resp_rate_mean: float = 20.0  # breaths/min
    resp_rate_sd: float = 1.5
    peak_insp_flow_mean: float = 40.0  # L/min
    peak_insp_flow_sd: float = 5.0
    insp_fraction_mean: float = 0.33
    insp_fraction_sd: float = 0.02
    exp_tau_mean: float = 0.4  # s
    exp_tau_sd: float = 0.05

    def validate(self):
        if min(self.resp_rate_mean, self.peak_insp_flow_mean, self.exp_tau_mean) <= 0:
            raise ConfigInvalid("breath rates, amplitudes and time constants must be positive")
        if not 0 < self.insp_fraction_mean < 1:
            raise ConfigInvalid("insp_fraction_mean must lie in (0, 1)")
        if min(self.resp_rate_sd, self.peak_insp_flow_sd, self.insp_fraction_sd, self.exp_tau_sd) < 0:
            raise ConfigInvalid("standard deviations must be non-negative")


@dataclass(frozen=True)
class PlantConfig:
    band_low_hz: float = 10.0
    band_high_hz: float = 12.0
    amplitude: float = 5.0  # L/min
    label: Label = Label.ARDS
    max_burst_s: float = 0.8
    placement: str = "expiration"  # or "inspiration"
    random_phase: bool = True

    def validate(self):
        if not 0 < self.band_low_hz <= self.band_high_hz <= SAMPLE_RATE_HZ / 2:
            raise ConfigInvalid("planted band must lie inside (0, 25] Hz")
        if self.amplitude < 0 or self.max_burst_s <= 0:
            raise ConfigInvalid("plant amplitude must be >= 0 and burst length > 0")
        if self.placement not in ("expiration", "inspiration"):
            raise ConfigInvalid("plant placement must be 'expiration' or 'inspiration'")


@dataclass(frozen=True)
class SynthConfig:
    n_patients_per_class: int = 20
    duration_s: float = 300.0
    seed: int = 0
    ards: BreathParams = field(default_factory=BreathParams)
    non_ards: BreathParams = field(default_factory=BreathParams)
    noise_sd: float = 0.3  # L/min, white
    plant: PlantConfig | None = field(default_factory=PlantConfig)
    breath_jitter: float = 0.05  # per-breath coefficient of variation around patient means
    lead_in_s: float = 0.5
    lead_in_flow: float = 1.0  # L/min expired during the lead-in
    exp_rise_tau: float = 0.15  # s, expiratory rise time constant
    onset_threshold: float = 2.0  # used for ground-truth onset indices
    match_volumes: bool = True

    def validate(self):
        if self.n_patients_per_class < 1 or self.duration_s <= 0:
            raise ConfigInvalid("need at least one patient per class and a positive duration")
        if self.noise_sd < 0 or self.breath_jitter < 0 or self.lead_in_s < 0.1:
            raise ConfigInvalid("noise/jitter must be >= 0 and lead-in >= 0.1 s")
        if self.exp_rise_tau <= 0:
            raise ConfigInvalid("exp_rise_tau must be positive")
        self.ards.validate()
        self.non_ards.validate()
        if self.plant is not None:
            self.plant.validate()

    def params_for(self, label: Label) -> BreathParams:
        return self.ards if Label(label) is Label.ARDS else self.non_ards

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.plant is not None:
            d["plant"]["label"] = self.plant.label.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        d["ards"] = BreathParams(**d.get("ards", {}))
        d["non_ards"] = BreathParams(**d.get("non_ards", {}))
        if d.get("plant") is not None:
            p = dict(d["plant"])
            p["label"] = Label(p.get("label", "ards"))
            d["plant"] = PlantConfig(**p)
        return cls(**d)


def planted_cohort_config(
    n_patients_per_class=20, duration_s=600.0, seed=0, band=(10.0, 12.0), amplitude=5.0
) -> SynthConfig:
    """Cohort whose only within-instance class difference is the planted band.

    The classes breathe at different rates (9 vs 11 /min) with equal inspiratory time, so
    breath-timing features separate them, but a 224-sample instance (4.48 s) never reaches the
    next breath and therefore carries no timing information.
    """
    ti = 4.0 / 3.0
    ards = BreathParams(resp_rate_mean=11.0, resp_rate_sd=0.3, insp_fraction_mean=ti * 11.0 / 60, insp_fraction_sd=0.005)
    non = BreathParams(resp_rate_mean=9.0, resp_rate_sd=0.3, insp_fraction_mean=ti * 9.0 / 60, insp_fraction_sd=0.005)
    return SynthConfig(
        n_patients_per_class=n_patients_per_class,
        duration_s=duration_s,
        seed=seed,
        ards=ards,
        non_ards=non,
        breath_jitter=0.03,
        plant=PlantConfig(band[0], band[1], amplitude),
    )


def control_cohort_config(n_patients_per_class=20, duration_s=600.0, seed=0, amplitude=20.0) -> SynthConfig:
    """Same breathing as :func:`planted_cohort_config` but the class signal is a slow (< 1 Hz)
    fixed-phase reshaping of every planted-class inspiration.

    At 0.7-0.8 Hz the tone spans about one cycle of the 4/3 s inspiration, so it moves flow
    from late to early inspiration with little change in volume or peak.
    """
    cfg = planted_cohort_config(n_patients_per_class, duration_s, seed)
    return replace(cfg, plant=PlantConfig(0.7, 0.8, amplitude, placement="inspiration", random_phase=False))


@dataclass
class BreathTruth:
    start: int
    onset: int
    n_samples: int
    i_time: float
    e_time: float
    peak_insp_flow: float
    tidal_volume: float  # analytic inspired volume, L
    exp_volume: float  # analytic expired volume, L
    complete: bool = True


@dataclass
class GroundTruth:
    patient_id: str
    label: Label
    n_samples: int
    breaths: list[BreathTruth]

    @property
    def onsets(self) -> list[int]:
        return [b.onset for b in self.breaths if b.onset < self.n_samples]

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "n_samples": self.n_samples,
            "onsets": self.onsets,
            "breaths": [asdict(b) for b in self.breaths],
        }


def _positive_draw(rng, mean, sd, floor):
    return max(floor, rng.normal(mean, sd)) if sd > 0 else mean


def _biexp_shape(te, tau, tau_r):
    return np.exp(-te / tau) - np.exp(-te / tau_r)


def _biexp_peak(tau, tau_r):
    t_star = math.log(tau / tau_r) * tau * tau_r / (tau - tau_r)
    return t_star, float(_biexp_shape(t_star, tau, tau_r))


def _biexp_integral(T, tau, tau_r):
    return tau * (1 - math.exp(-T / tau)) - tau_r * (1 - math.exp(-T / tau_r))


def _breath(rng, p: BreathParams, patient: dict, cfg: SynthConfig, plant: PlantConfig | None):
    """One breath's samples and analytic summary (onset relative to breath start)."""
    fs = SAMPLE_RATE_HZ
    j = cfg.breath_jitter
    rr = _positive_draw(rng, patient["rr"], j * patient["rr"], 0.25 * patient["rr"])
    peak = _positive_draw(rng, patient["peak"], j * patient["peak"], 0.25 * patient["peak"])
    frac = min(0.8, max(0.1, patient["frac"]))
    tau = _positive_draw(rng, patient["tau"], j * patient["tau"], 0.25 * patient["tau"])
    tau = max(tau, 2 * cfg.exp_rise_tau)

    n = max(int(round(60.0 / rr * fs)), 4)
    n_insp = min(max(int(round(frac * n)), 2), n - 2)
    ti, te = n_insp / fs, (n - n_insp) / fs
    t = np.arange(n) / fs
    flow = np.empty(n)
    flow[:n_insp] = peak * np.sin(np.pi * t[:n_insp] / ti)
    tv = (2.0 / np.pi) * peak * ti / 60.0

    t_star, g_max = _biexp_peak(tau, cfg.exp_rise_tau)
    shape_area = _biexp_integral(te, tau, cfg.exp_rise_tau)
    if cfg.match_volumes:
        p_exp = tv * 60.0 * g_max / shape_area
    else:
        p_exp = peak
    te_t = t[n_insp:] - ti
    flow[n_insp:] = -p_exp * _biexp_shape(te_t, tau, cfg.exp_rise_tau) / g_max
    exp_volume = p_exp * shape_area / g_max / 60.0

    if plant is not None and plant.amplitude > 0 and plant.placement == "inspiration":
        # sin^2 window keeps flow >= sin(pi u) * (peak - amplitude) > 0 while amplitude < peak
        f = rng.uniform(plant.band_low_hz, plant.band_high_hz)
        phase = rng.uniform(0, 2 * np.pi) if plant.random_phase else 0.0
        u = t[:n_insp] / ti
        amp = min(plant.amplitude, 0.9 * peak)
        flow[:n_insp] += amp * np.sin(np.pi * u) ** 2 * np.sin(2 * np.pi * f * t[:n_insp] + phase)
    elif plant is not None and plant.amplitude > 0:
        # burst from the expiratory peak until |flow| decays to amplitude + threshold + 1
        floor = plant.amplitude + cfg.onset_threshold + 1.0
        if p_exp > floor:
            t_end = tau * math.log(p_exp / floor)
            dur = min(plant.max_burst_s, t_end - t_star)
            if dur > 0.1:
                f = rng.uniform(plant.band_low_hz, plant.band_high_hz)
                phase = rng.uniform(0, 2 * np.pi) if plant.random_phase else 0.0
                sel = (te_t >= t_star) & (te_t < t_star + dur)
                u = (te_t[sel] - t_star) / dur
                burst = plant.amplitude * np.sin(np.pi * u) ** 2 * np.sin(2 * np.pi * f * (te_t[sel] - t_star) + phase)
                idx = n_insp + np.flatnonzero(sel)
                flow[idx] = np.minimum(flow[idx] + burst, -cfg.onset_threshold)

    above = np.flatnonzero(flow[:n_insp] > cfg.onset_threshold)
    onset = int(above[0]) if above.size else 0
    truth = dict(onset=onset, n_samples=n, i_time=ti, e_time=te, peak_insp_flow=peak, tidal_volume=tv, exp_volume=exp_volume)
    return flow, truth


def generate_patient(
    patient_id: str, label: Label, cfg: SynthConfig, rng: np.random.Generator
) -> tuple[FlowSeries, GroundTruth]:
    cfg.validate()
    label = Label(label)
    fs = SAMPLE_RATE_HZ
    p = cfg.params_for(label)
    plant = cfg.plant if cfg.plant is not None and cfg.plant.label is label else None
    patient = {
        "rr": _positive_draw(rng, p.resp_rate_mean, p.resp_rate_sd, 0.25 * p.resp_rate_mean),
        "peak": _positive_draw(rng, p.peak_insp_flow_mean, p.peak_insp_flow_sd, 0.25 * p.peak_insp_flow_mean),
        "frac": rng.normal(p.insp_fraction_mean, p.insp_fraction_sd) if p.insp_fraction_sd > 0 else p.insp_fraction_mean,
        "tau": _positive_draw(rng, p.exp_tau_mean, p.exp_tau_sd, 0.25 * p.exp_tau_mean),
    }
    total = int(round(cfg.duration_s * fs))
    lead = int(round(cfg.lead_in_s * fs))
    # lead-in mimics the end of a previous expiration so the first onset is detectable
    pieces = [np.full(lead, -cfg.lead_in_flow)]
    pos = lead
    breaths = []
    while pos < total:
        flow, tr = _breath(rng, p, patient, cfg, plant)
        complete = pos + tr["n_samples"] <= total
        breaths.append(
            BreathTruth(
                start=pos,
                onset=pos + tr["onset"],
                n_samples=tr["n_samples"],
                i_time=tr["i_time"],
                e_time=tr["e_time"],
                peak_insp_flow=tr["peak_insp_flow"],
                tidal_volume=tr["tidal_volume"],
                exp_volume=tr["exp_volume"],
                complete=complete,
            )
        )
        pieces.append(flow)
        pos += tr["n_samples"]
    samples = np.concatenate(pieces)[:total]
    if cfg.noise_sd > 0:
        samples = samples + rng.normal(0.0, cfg.noise_sd, size=samples.size)
    breaths = [b for b in breaths if b.onset < total]
    return FlowSeries(patient_id, label, samples, fs), GroundTruth(patient_id, label, total, breaths)


def patient_rng(seed: int, class_index: int, patient_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, class_index, patient_index])


def patient_ids(cfg: SynthConfig) -> list[tuple[str, Label, int, int]]:
    out = []
    for ci, label in enumerate((Label.ARDS, Label.NON_ARDS)):
        for i in range(cfg.n_patients_per_class):
            out.append((f"{label.value}-{i:03d}", label, ci, i))
    return out


def generate_series(cfg: SynthConfig) -> tuple[list[FlowSeries], dict[str, GroundTruth]]:
    """In-memory cohort; identical to what :func:`generate_cohort` writes."""
    series, truth = [], {}
    for pid, label, ci, i in patient_ids(cfg):
        s, gt = generate_patient(pid, label, cfg, patient_rng(cfg.seed, ci, i))
        series.append(s)
        truth[pid] = gt
    return series, truth


def generate_cohort(cfg: SynthConfig, out_dir) -> CohortManifest:
    """Write ``manifest.json``, ``flow/<id>.txt`` and ``ground_truth.json`` under ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        series, truth = generate_series(cfg)
        entries = []
        for s in series:
            path = write_flow_series(s, out / "flow" / f"{s.patient_id}.txt")
            entries.append(ManifestEntry(s.patient_id, s.label, path))
        manifest = CohortManifest(tuple(entries))
        write_manifest(manifest, out / "manifest.json")
        doc = {"config": cfg.to_dict(), "patients": {pid: gt.to_dict() for pid, gt in truth.items()}}
        (out / "ground_truth.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write synthetic cohort to {out}: {exc}") from exc
    return manifest


def load_ground_truth(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))["patients"]
