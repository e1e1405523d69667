"""Catalogue of initial distributions for ensembles."""
from __future__ import annotations

from dataclasses import dataclass

from .exceptions import ParameterError

MAP_KINDS = ("uniform_boole", "uniform01", "beta_like")
CHAIN_KINDS = ("origin", "chain_state")


@dataclass(frozen=True)
class InitialMeasure:
    """An initial law, identified by ``kind`` plus up to two parameters.

    ``uniform_boole``   uniform on (-2, 2)
    ``uniform01``       uniform on (0, 1)
    ``beta_like``       Beta(a, b), rescaled to (-2, 2) for Boole's map
    ``origin``          chain started at the origin
    ``chain_state``     chain started at (ray a, height b)
    """

    kind: str
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if self.kind not in MAP_KINDS + CHAIN_KINDS:
            raise ParameterError(f"unknown initial measure {self.kind!r}")
        if self.kind == "beta_like":
            if self.a is None or self.b is None or self.a <= 0 or self.b <= 0:
                raise ParameterError("beta_like needs positive shape parameters a, b")
        if self.kind == "chain_state":
            if self.a is None or self.b is None:
                raise ParameterError("chain_state needs a ray index and a height")
            if int(self.a) != self.a or int(self.b) != self.b or self.a < 1 or self.b < 1:
                raise ParameterError("chain_state needs ray >= 1 and height >= 1 (integers)")

    @property
    def id(self) -> str:
        if self.kind == "beta_like":
            return f"beta_like:{self.a:g},{self.b:g}"
        if self.kind == "chain_state":
            return f"chain_state:{int(self.a)},{int(self.b)}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "InitialMeasure":
        """Parse ``kind`` or ``kind:a,b`` as produced by :attr:`id`."""
        kind, _, rest = text.strip().partition(":")
        if not rest:
            return cls(kind)
        try:
            a, b = (float(v) for v in rest.split(","))
        except ValueError as exc:
            raise ParameterError(f"cannot parse measure {text!r}") from exc
        return cls(kind, a, b)
