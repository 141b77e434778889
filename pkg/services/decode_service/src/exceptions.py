class DecodeError(Exception):
    pass

class PermanentError(DecodeError):
    """Won't improve with retry: bad input, malformed file, precondition violated."""
    pass


class InvalidDistribution(PermanentError):
    pass

class NonNormalized(InvalidDistribution):
    pass

class NegativeProb(InvalidDistribution):
    pass

class DuplicateSupport(InvalidDistribution):
    pass

class UnsortedTruncation(InvalidDistribution):
    """Truncated top-K probabilities must be non-increasing."""
    pass


class InvalidSequence(PermanentError):
    """Token ids out of range or a prompt boundary outside the sequence."""
    pass

class EmptySequence(PermanentError):
    pass

class PrefixMutated(PermanentError):
    """The already-indexed prefix of a sequence changed under the draft pool."""
    pass

class UntrainedModel(PermanentError):
    pass

class ModelSpecError(PermanentError):
    pass

class EmptyRecords(PermanentError):
    pass

class BadCorpus(PermanentError):
    pass

class BadConfig(PermanentError):
    pass

class MissingReference(PermanentError):
    pass
