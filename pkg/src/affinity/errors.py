"""Exception hierarchy shared across the package."""


class AffinityError(Exception):
    """Base class for all package-specific errors."""


class ZeroVarianceColumn(AffinityError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} has zero sample variance")


class DimensionMismatch(AffinityError):
    pass


class NotConverged(AffinityError):
    def __init__(self, final_error, iterations=None, message=None):
        self.final_error = final_error
        self.iterations = iterations
        msg = message or f"iteration limit reached, final error {final_error:.3e}"
        super().__init__(msg)


class NumericalOverflow(AffinityError):
    pass


class CenteringNotConverged(NotConverged):
    pass


class SupportPointNotFound(AffinityError):
    pass


class DegenerateData(AffinityError):
    pass


class NonPositiveVariance(AffinityError):
    pass


class SingularFisher(AffinityError):
    def __init__(self, smallest_eigenvalue):
        self.smallest_eigenvalue = smallest_eigenvalue
        super().__init__(
            "Fisher information is numerically singular "
            f"(smallest eigenvalue {smallest_eigenvalue:.3e}); "
            "attributes may be collinear"
        )


class SingularCornerBlock(AffinityError):
    pass


class SingularOmega(AffinityError):
    pass


class EmptyBin(AffinityError):
    pass


class AllSingleBin(AffinityError):
    pass


class ZeroSingles(AffinityError):
    pass


class NoAcquaintance(AffinityError):
    pass


class MissingColumn(AffinityError):
    pass


class NonNumericCell(AffinityError):
    def __init__(self, row, col, value=None):
        self.row = row
        self.col = col
        super().__init__(f"non-numeric value {value!r} at row {row}, column {col!r}")


class EmptyAfterFiltering(AffinityError):
    pass
