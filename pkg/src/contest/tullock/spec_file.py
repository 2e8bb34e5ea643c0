import math
import re
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .core import ContestInstance, Player
from .design import CoordinatorInstance
from .exceptions import SpecFileError

FLOAT_PATTERN = re.compile(
    r"""^(?:[-+]?[0-9][0-9_]*\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?[0-9][0-9_]*[eE][-+]?[0-9]+
    |[-+]?\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""",
    re.VERBOSE,
)


class SpecLoader(yaml.SafeLoader):
    """
    ``yaml.SafeLoader`` that also reads exponent floats without a dot.

    Plain YAML 1.1 resolution loads ``1e-3`` as a string; YAML 1.2 reads it as a float.
    """


SpecLoader.add_implicit_resolver("tag:yaml.org,2002:float", FLOAT_PATTERN, list("-+0123456789."))


def _positive_number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecFileError(key, f"{key} must be a number, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise SpecFileError(key, f"{key} must be positive, got {value}")
    return float(value)


@dataclass(frozen=True)
class ContestSpecFile:
    """
    A contest described in a YAML document.

    The document holds a ``players`` list of ``{v, c}`` mappings and, for design
    commands, a ``coalition`` of 1-based player numbers together with ``v_K``::

        players:
          - {v: 1, c: 9}
          - {v: 1, c: 10}
          - {v: 1, c: 3}
        coalition: [2, 3]
        v_K: 1
    """

    players: tuple[Player, ...]
    coalition: tuple[int, ...] | None = None
    v_K: float | None = None

    @classmethod
    def from_mapping(cls, data: Any) -> "ContestSpecFile":
        """
        Validate a parsed document.

        Raises:
            SpecFileError: Naming the first offending key.
        """
        if not isinstance(data, Mapping):
            raise SpecFileError("<root>", f"Spec must be a mapping, got {type(data).__name__}")
        unknown = sorted(set(data) - {"players", "coalition", "v_K"})
        if unknown:
            raise SpecFileError(str(unknown[0]), f"Unknown key {unknown[0]!r}")

        entries = data.get("players")
        if not isinstance(entries, list):
            raise SpecFileError("players", f"players must be a list, got {type(entries).__name__}")
        players = []
        for index, entry in enumerate(entries):
            key = f"players[{index}]"
            if not isinstance(entry, Mapping):
                raise SpecFileError(key, f"{key} must be a mapping with v and c")
            for field in ("v", "c"):
                if field not in entry:
                    raise SpecFileError(f"{key}.{field}", f"{key}.{field} is missing")
            players.append(Player(_positive_number(f"{key}.v", entry["v"]), _positive_number(f"{key}.c", entry["c"])))
        if len(players) < 2:
            raise SpecFileError("players", f"players must list at least 2 players, got {len(players)}")

        has_coalition, has_v_K = "coalition" in data, "v_K" in data
        if has_coalition != has_v_K:
            missing = "v_K" if has_coalition else "coalition"
            raise SpecFileError(missing, f"coalition and v_K must appear together, {missing} is missing")
        if not has_coalition:
            return cls(tuple(players))

        members = data["coalition"]
        if not isinstance(members, list) or not members:
            raise SpecFileError("coalition", f"coalition must be a nonempty list, got {members!r}")
        for member in members:
            if isinstance(member, bool) or not isinstance(member, int) or not 1 <= member <= len(players):
                raise SpecFileError("coalition", f"coalition member {member!r} is not a player number in 1..{len(players)}")
        if len(set(members)) != len(members):
            raise SpecFileError("coalition", f"coalition repeats a player: {members}")
        if len(members) == len(players):
            raise SpecFileError("coalition", "coalition must leave at least one opponent")

        return cls(tuple(players), tuple(members), _positive_number("v_K", data["v_K"]))

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ContestSpecFile":
        """Load and validate a spec file."""
        try:
            with open(path, encoding="utf-8") as f:
                data = yaml.load(f, Loader=SpecLoader)
        except OSError as e:
            raise SpecFileError("<file>", f"Cannot read {path}: {e.strerror}") from e
        except yaml.YAMLError as e:
            raise SpecFileError("<file>", f"Cannot parse {path}: {e}") from e
        return cls.from_mapping(data)

    @property
    def has_coordinator(self) -> bool:
        return self.coalition is not None

    def contest(self) -> ContestInstance:
        return ContestInstance(self.players)

    def coordinator(self) -> CoordinatorInstance:
        """
        The coordinator instance described by the file.

        Raises:
            SpecFileError: If the file has no coalition and ``v_K``.
        """
        if self.coalition is None or self.v_K is None:
            raise SpecFileError("coalition", "Design commands need coalition and v_K in the spec")
        return CoordinatorInstance.from_contest(self.contest(), [m - 1 for m in self.coalition], self.v_K)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"players": [{"v": p.valuation, "c": p.cost} for p in self.players]}
        if self.coalition is not None:
            data["coalition"] = list(self.coalition)
            data["v_K"] = self.v_K
        return data
