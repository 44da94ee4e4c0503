class ConfigError(ValueError):
    """Invalid model, method or run configuration."""


class NumericalFailure(RuntimeError):
    """A numerical step could not be completed."""


class DegenerateFrameError(NumericalFailure):
    def __init__(self, pair, gap):
        self.pair = tuple(int(i) for i in pair)
        self.gap = float(gap)
        super().__init__(f"adiabatic states {self.pair} are degenerate (gap {self.gap:.3e} Eh)")


class ExtentError(NumericalFailure):
    """Wavepacket norm reached the edge of the grid."""


class EnsembleFailure(NumericalFailure):
    """Too many trajectories failed for the ensemble to be trusted."""
