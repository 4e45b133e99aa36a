"""Deterministic carbon nanotube dispersion scenario for the run loop.

Four simulated protocols: (1) prepare a suspension from powder, (2)
sonicate it, (3) dilute it, (4) characterize the average tube diameter.
The simulator keeps (concentration mg/mL, diameter nm) as its state:

    prepare     c := target concentration, d := 300
    sonicate    d := max(d / 2, floor(c)) where floor(1.0) = 80 and the
                floor halves with the concentration below 1.0 (50 * c)
    dilute      c := c / dilution factor
    characterize  reports d unchanged

The scripted policy mirrors a realistic lab heuristic: after each
characterization it ends inside the goal band, re-sonicates while the
last pass still improved the diameter by more than 5 percent, and dilutes
before sonicating once improvement stalls. Constants are tuned fixtures
for reproducible tests, not materials science.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .records import AiralogyRecord
from .workflow import END, ParamSplit, RunState, WorkflowDef

PREPARE, SONICATE, DILUTE, CHARACTERIZE = 1, 2, 3, 4

IMPROVEMENT_THRESHOLD = 0.05

_BAND_RE = re.compile(r"(\d+(?:\.\d+)?)\s*[-–—]\s*(\d+(?:\.\d+)?)\s*nm")
_TOPIC_RE = re.compile(r"carbon nanotube|nanotube|\bcnt\b", re.IGNORECASE)

CNT_MANIFEST = {
    PREPARE: ParamSplit(
        parameter_fields=frozenset({"target_concentration_mg_ml"}),
        feedback_fields=frozenset({"actual_concentration_mg_ml"}),
    ),
    SONICATE: ParamSplit(
        parameter_fields=frozenset({"sonication_minutes"}),
        feedback_fields=frozenset({"total_on_time_min"}),
    ),
    DILUTE: ParamSplit(
        parameter_fields=frozenset({"dilution_factor"}),
        feedback_fields=frozenset({"final_concentration_mg_ml"}),
    ),
    CHARACTERIZE: ParamSplit(
        parameter_fields=frozenset({"sample_volume_ul"}),
        feedback_fields=frozenset({"average_diameter_nm"}),
    ),
}


class CntSimulator:
    """Stateful stand-in for the four lab protocols."""

    manifest = CNT_MANIFEST

    def __init__(self):
        self.concentration: float | None = None
        self.diameter: float | None = None
        self.sonication_total = 0.0

    @staticmethod
    def _floor(concentration: float) -> float:
        # agglomeration limit: 80 nm at standard concentration, halving with c below it
        return 80.0 if concentration >= 1.0 else 50.0 * concentration

    def execute(self, index: int, parameters: dict) -> dict:
        if index == PREPARE:
            self.concentration = float(parameters["target_concentration_mg_ml"])
            self.diameter = 300.0
            self.sonication_total = 0.0
            return {"actual_concentration_mg_ml": self.concentration}
        if self.concentration is None or self.diameter is None:
            raise RuntimeError("suspension not prepared yet")
        if index == SONICATE:
            self.sonication_total += float(parameters["sonication_minutes"])
            self.diameter = max(self.diameter / 2.0, self._floor(self.concentration))
            return {"total_on_time_min": self.sonication_total}
        if index == DILUTE:
            self.concentration /= float(parameters["dilution_factor"])
            return {"final_concentration_mg_ml": self.concentration}
        if index == CHARACTERIZE:
            return {"average_diameter_nm": self.diameter}
        raise KeyError(f"unknown protocol index {index}")


def cnt_simulator() -> CntSimulator:
    return CntSimulator()


@dataclass
class CntPolicy:
    """Scripted decisions driving the dispersion workflow to its goal band."""

    band: tuple[float, float] | None = None
    default_goal: str = (
        "Disperse a carbon nanotube suspension until the measured average "
        "diameter falls inside 10-30 nm."
    )

    def propose_goal(self, workflow: WorkflowDef) -> str:
        return self.default_goal

    def plan_strategy(self, workflow: WorkflowDef, goal: str) -> str | None:
        if not _TOPIC_RE.search(goal) or "diameter" not in goal.lower():
            return END
        m = _BAND_RE.search(goal)
        if not m:
            return END
        self.band = (float(m.group(1)), float(m.group(2)))
        lo, hi = self.band
        return (
            f"Prepare the suspension once, then loop sonication and "
            f"characterization; dilute before sonicating when a pass stops "
            f"shortening the tubes, and stop once the measured diameter sits "
            f"inside {lo:g}-{hi:g} nm."
        )

    # ------------------------------------------------------------- selection

    def _observations(self, run: RunState) -> list[float]:
        out = []
        for idx, record in zip(run.path, run.record_bodies):
            if idx == CHARACTERIZE:
                out.append(float(record.data.var["average_diameter_nm"]))
        return out

    def select_next(self, workflow: WorkflowDef, run: RunState) -> int | None:
        if not run.path:
            return PREPARE
        last = run.path[-1]
        if last in (PREPARE, DILUTE):
            return SONICATE
        if last == SONICATE:
            return CHARACTERIZE
        # after a characterization, decide from the measured series
        observations = self._observations(run)
        current = observations[-1]
        lo, hi = self.band
        if lo <= current <= hi:
            return END
        if len(observations) == 1:
            return SONICATE
        previous = observations[-2]
        if previous > 0 and (previous - current) / previous > IMPROVEMENT_THRESHOLD:
            return SONICATE
        return DILUTE

    def set_parameters(self, workflow: WorkflowDef, run: RunState, index: int) -> dict:
        return {
            PREPARE: {"target_concentration_mg_ml": 1.0},
            SONICATE: {"sonication_minutes": 30.0},
            DILUTE: {"dilution_factor": 2.0},
            CHARACTERIZE: {"sample_volume_ul": 100.0},
        }[index]

    def phase_conclusion(
        self, workflow: WorkflowDef, run: RunState, index: int, record: AiralogyRecord
    ) -> str:
        var = record.data.var
        if index == PREPARE:
            return (
                f"Suspension prepared at {var['actual_concentration_mg_ml']:g} mg/mL; "
                "tubes start heavily bundled."
            )
        if index == SONICATE:
            return (
                f"Sonicated for {var['sonication_minutes']:g} min "
                f"({var['total_on_time_min']:g} min total)."
            )
        if index == DILUTE:
            return (
                f"Diluted to {var['final_concentration_mg_ml']:g} mg/mL to ease "
                "re-agglomeration before the next sonication pass."
            )
        observations = self._observations(run)
        current = observations[-1]
        lo, hi = self.band
        if lo <= current <= hi:
            verdict = "inside the goal band"
        elif len(observations) >= 2 and observations[-2] > 0 and (
            (observations[-2] - current) / observations[-2] > IMPROVEMENT_THRESHOLD
        ):
            verdict = "still improving"
        elif len(observations) == 1:
            verdict = "first measurement"
        else:
            verdict = "no longer improving"
        return f"Measured average diameter {current:g} nm ({verdict})."

    def final_conclusion(self, workflow: WorkflowDef, run: RunState) -> str:
        observations = self._observations(run)
        dilutions = sum(1 for i in run.path if i == DILUTE)
        sonications = sum(1 for i in run.path if i == SONICATE)
        if not observations:
            return "Run stopped before any characterization was taken."
        current = observations[-1]
        lo, hi = self.band if self.band else (float("nan"), float("nan"))
        series = " -> ".join(f"{d:g}" for d in observations)
        if lo <= current <= hi:
            return (
                f"Goal reached: the average diameter settled at {current:g} nm, "
                f"inside {lo:g}-{hi:g} nm, after {sonications} sonication passes "
                f"and {dilutions} dilution(s); measured series {series} nm."
            )
        return (
            f"Run stopped with the diameter at {current:g} nm (target "
            f"{lo:g}-{hi:g} nm) after {sonications} sonication passes and "
            f"{dilutions} dilution(s); measured series {series} nm."
        )


def scripted_cnt_policy() -> CntPolicy:
    return CntPolicy()
