"""Classification of trajectories leaving the critical window."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class Tag(str, Enum):
    EPLUS = "EPlus"
    EMINUS = "EMinus"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class Outcome:
    """Exit class with the (rescaled) exit time and value.

    For ``Undecided`` the exit data is the terminal state of the path.
    """

    tag: Tag
    exit_time: Optional[float] = None
    exit_value: Optional[float] = None

    def to_dict(self) -> dict:
        return {"tag": self.tag.value, "exit_time": self.exit_time, "exit_value": self.exit_value}
