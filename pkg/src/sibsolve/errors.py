"""Exception types shared across the solver stack."""


class WidthBreach(Exception):
    """An oracle response exceeded the declared payoff width.

    Consumed by the width-doubling restart loop in the drivers; carries the
    observed spectral norm so the caller can report how far off the estimate
    was.
    """

    def __init__(self, observed_norm, declared_width):
        self.observed_norm = float(observed_norm)
        self.declared_width = float(declared_width)
        super().__init__(
            f"oracle payoff spectral norm {self.observed_norm:.6g} exceeds "
            f"declared width {self.declared_width:.6g}"
        )


class IterationCapExhausted(Exception):
    """The iteration budget ran out before the scheduled horizon completed.

    ``partial`` holds whatever intermediate result was available when the
    budget died (a certificate or a best-effort solution), so callers can
    still emit diagnostics.
    """

    def __init__(self, message="iteration cap exhausted", partial=None):
        self.partial = partial
        super().__init__(message)


class DegenerateInstance(Exception):
    """The radius/objective guess collapsed below the resolution floor.

    This is the operational signal that the input bodies (almost certainly)
    share a common point, a regime the solver does not handle.
    """


class BudgetExceeded(Exception):
    """A desk-scale reference computation exceeded its iteration budget."""
