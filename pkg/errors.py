class EstimationError(Exception):
    pass


class ConvergenceError(EstimationError):
    pass


class SeparationError(ConvergenceError):
    pass


class MonotoneLikelihoodError(ConvergenceError):
    pass


class SingularInformationError(EstimationError):
    pass


class CensoringError(EstimationError):
    pass


class BracketError(ValueError):
    pass


class SimulationAborted(RuntimeError):

    def __init__(self, n_failed, n_reps, threshold):
        super().__init__("{0} of {1} replicates failed (threshold {2:.0%})".format(n_failed, n_reps, threshold))
        self.n_failed = n_failed
        self.n_reps = n_reps
        self.threshold = threshold
