'''
    Exception hierarchy. Every error carries a machine-readable kind (used
    in the JSON error objects written by the command line) and the exit code
    the command line maps it to.
'''


from clfstab.consts import EXIT_VALIDATION, EXIT_SIMULATION


class ClfstabError(Exception):
    kind = 'error'
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str = '', **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def as_dict(self):
        d = {'kind': self.kind, 'message': self.message}
        d.update({k: _plain(v) for k, v in self.details.items()})
        return d


def _plain(value):
    if hasattr(value, 'tolist'):
        return value.tolist()
    return value


class DimensionMismatch(ClfstabError):
    kind = 'dimension_mismatch'


class NonFiniteOutput(ClfstabError):
    kind = 'non_finite_output'
    exit_code = EXIT_SIMULATION


class NotAffine(ClfstabError):
    kind = 'not_affine'


class UnknownSystem(ClfstabError):
    kind = 'unknown_system'


class InvalidParams(ClfstabError):
    kind = 'invalid_params'


class OutOfRange(ClfstabError):
    kind = 'out_of_range'


class UnboundedBundle(ClfstabError):
    kind = 'unbounded_bundle'


class InvalidBundle(ClfstabError):
    kind = 'invalid_bundle'


class CLFPremiseViolated(ClfstabError):
    kind = 'clf_premise_violated'


class InvalidCLF(ClfstabError):
    kind = 'invalid_clf'


class NonConvergence(ClfstabError):
    kind = 'non_convergence'
    exit_code = EXIT_SIMULATION


class RefusedDiscontinuous(ClfstabError):
    kind = 'refused_discontinuous'


class PreconditionFailed(ClfstabError):
    kind = 'precondition_failed'


class NotHurwitz(ClfstabError):
    kind = 'not_hurwitz'


class InvalidCandidate(ClfstabError):
    kind = 'invalid_candidate'


class InconsistentTransform(ClfstabError):
    kind = 'inconsistent_transform'


class NonFiniteState(ClfstabError):
    kind = 'non_finite_state'
    exit_code = EXIT_SIMULATION


class InvalidPerturbation(ClfstabError):
    kind = 'invalid_perturbation'


class ConfigError(ClfstabError):
    kind = 'config_error'
