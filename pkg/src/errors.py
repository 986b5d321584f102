from __future__ import annotations


class MoplaError(Exception):
    """Base error. ``formula`` names the identity or inequality being evaluated, if any."""

    def __init__(self, message: str, formula: str | None = None) -> None:
        self.formula = formula
        if formula:
            message = f"[{formula}] {message}"
        super().__init__(message)


class ConfigurationError(MoplaError):
    pass


class UsageError(ConfigurationError):
    pass


class InputError(MoplaError):
    pass


class RangeError(InputError):
    pass


class GeometryDegeneracyError(MoplaError):
    def __init__(self, message: str, samples: list[tuple] | None = None) -> None:
        self.samples = list(samples or [])
        if self.samples:
            shown = ", ".join(f"(X={x}, t={t:.6g})" for x, t in self.samples[:5])
            more = len(self.samples) - 5
            message = f"{message}: {shown}" + (f" (+{more} more)" if more > 0 else "")
        super().__init__(message, formula="E:Det_Bd")


class UnsupportedDimensionError(MoplaError):
    pass


# -- Discretization failures (quadrature under-resolution) --

class DiscretizationError(MoplaError):
    pass


class RankDeficiencyError(DiscretizationError):
    def __init__(self, index: int, pivot: float) -> None:
        self.index = index
        self.pivot = pivot
        super().__init__(
            f"Gram-Schmidt pivot {pivot:.3e} below 1e-12 at basis function k={index}"
        )


class SingularMassError(DiscretizationError):
    def __init__(self, t: float, smallest_eigenvalue: float) -> None:
        self.t = t
        self.smallest_eigenvalue = smallest_eigenvalue
        super().__init__(
            f"Cholesky factorization of M_N(t={t:.6g}) failed "
            f"(smallest eigenvalue {smallest_eigenvalue:.3e}); quadrature may be under-resolved",
            formula="E:Uni_PD",
        )


# -- Integrator failures --

class IntegrationError(MoplaError):
    pass


class StiffnessError(IntegrationError):
    def __init__(self, message: str, t: float) -> None:
        self.t = t
        super().__init__(f"{message} at t={t:.6g}; reduce basis.N or set ode.method=implicit_midpoint")


class DivergenceError(IntegrationError):
    def __init__(self, last_good_time: float) -> None:
        self.last_good_time = last_good_time
        super().__init__(f"non-finite state after t={last_good_time:.6g}")
