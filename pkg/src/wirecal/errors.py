"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An input violated a documented precondition (non-finite value, bad shape, ...)."""


class DegenerateGeometryError(ValueError):
    """The tool point coincides with the wire anchor, so the wire direction is undefined."""


class CalibrationDivergedError(RuntimeError):
    """The loss became non-finite during calibration.

    ``report`` holds the partial report up to the last finite iterate.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
