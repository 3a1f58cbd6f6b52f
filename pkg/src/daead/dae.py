"""The DAE container shared by every module."""
from dataclasses import dataclass, field
from typing import Any, Callable, Optional


@dataclass
class DaeSystem:
    """A DAE ``f_i(t, x_j and derivatives) = 0``, i, j < n.

    ``residual(t, z, params)`` is generic code: it receives the time and a
    list of ``n`` scalars of whatever type is being propagated and returns
    ``n`` residuals, using :func:`daead.functions.diff` for derivatives.
    """

    n: int
    residual: Callable
    names: list = field(default_factory=list)
    params: Any = None
    description: str = ""
    lagrangian: Optional[Any] = None
    _program: Any = field(default=None, repr=False, compare=False)
    _structure: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.names:
            self.names = [f"x{j}" for j in range(self.n)]
        if len(self.names) != self.n:
            raise ValueError("need one name per variable")

    def evaluate(self, t, z):
        return list(self.residual(t, z, self.params))

    def program(self):
        """The traced residual program (built once)."""
        if self._program is None:
            from .compiled import SeriesProgram

            self._program = SeriesProgram.trace(self.residual, self.n, self.params)
        return self._program

    def structure(self):
        """Cached structural analysis."""
        if self._structure is None:
            from .structural import analyze

            self._structure = analyze(self)
        return self._structure

    def index_of(self, name):
        return self.names.index(name)
