"""Exception hierarchy shared by every btmlab module."""


class BTMError(Exception):
    """Base class for all btmlab errors."""


class ParameterError(BTMError, ValueError):
    """An argument is outside its admissible set."""


class DomainError(ParameterError):
    """A function was evaluated outside its domain (e.g. t <= e for log log t)."""


class RegimeError(ParameterError):
    """The requested quantity does not exist in this tail-exponent regime."""


class InfiniteMeanError(RegimeError):
    """E[tau_0] is infinite (alpha <= 1)."""


class RangeError(BTMError, IndexError):
    """A lattice query falls outside the stored window or simulated horizon."""


class WindowTooSmallError(BTMError):
    """Absorbed mass at the window boundary exceeds the allowed budget."""

    def __init__(self, leak, budget):
        self.leak = float(leak)
        self.budget = float(budget)
        super().__init__(
            f"window too small: boundary leak {self.leak:.3e} exceeds {self.budget:.3e}"
        )
