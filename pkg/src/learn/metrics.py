"""Episode bookkeeping and the outcome percentages reported for every run."""

from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

Outcome = Literal["success", "failure", "timeout"]


class RunMetrics(BaseModel):
    rewards: List[float] = []
    outcomes: List[Outcome] = []
    steps: List[int] = []

    def record(self, reward: float, outcome: Outcome, steps: int):
        self.rewards.append(float(reward))
        self.outcomes.append(outcome)
        self.steps.append(int(steps))

    @property
    def episodes(self) -> int:
        return len(self.rewards)

    def _percent(self, outcome: Outcome) -> float:
        if not self.outcomes:
            return 0.0
        return 100.0 * sum(o == outcome for o in self.outcomes) / len(self.outcomes)

    @property
    def succ(self) -> float:
        return self._percent("success")

    @property
    def fail(self) -> float:
        return self._percent("failure")

    @property
    def t_out(self) -> float:
        return self._percent("timeout")

    @property
    def opt(self) -> float:
        """Share of episodes reaching the best accumulated reward seen in this run."""
        if not self.rewards:
            return 0.0
        rewards = np.asarray(self.rewards)
        return 100.0 * float(np.isclose(rewards, rewards.max()).mean())

    @property
    def best_reward(self) -> Optional[float]:
        return max(self.rewards) if self.rewards else None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "episode": np.arange(self.episodes),
                "accumulated_reward": self.rewards,
                "outcome": self.outcomes,
                "steps": self.steps,
            }
        )

    def summary(self, n_parts: int) -> Dict[str, float]:
        return {
            "|S|": n_parts,
            "Succ": round(self.succ, 2),
            "Fail": round(self.fail, 2),
            "T_out": round(self.t_out, 2),
            "Opt": round(self.opt, 2),
        }

    def write_csv(self, path: Path, n_parts: Optional[int] = None):
        frame = self.to_frame()
        frame.to_csv(path, index=False)
        if n_parts is not None:
            summary_path = Path(path).with_name(Path(path).stem + "_summary.csv")
            pd.DataFrame([self.summary(n_parts)]).to_csv(summary_path, index=False)


def group_statistics(groups: Dict[int, Sequence[float]]) -> pd.DataFrame:
    """Mean, standard deviation and normalized deviation of rewards per group."""
    rows = []
    for key, values in groups.items():
        values = np.asarray(values, dtype=float)
        mean = float(values.mean()) if values.size else float("nan")
        std = float(values.std()) if values.size else float("nan")
        rows.append(
            {
                "part": key,
                "n": int(values.size),
                "mean": mean,
                "std": std,
                "normalized_std": std / abs(mean) if mean else (0.0 if std == 0 else float("inf")),
            }
        )
    return pd.DataFrame(rows, columns=["part", "n", "mean", "std", "normalized_std"])
