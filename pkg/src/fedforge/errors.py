"""Shared exception hierarchy."""


class FedForgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FedForgeError):
    """Task/data configuration problem; carries the offending key."""

    def __init__(self, key: str, message: str = ""):
        self.key = key
        super().__init__(message or f"{type(self).__name__}: {key}")


class UnknownKey(ConfigError):
    pass


class MissingRequiredKey(ConfigError):
    pass


class ValueOutOfRange(ConfigError):
    pass


class BadEnumValue(ConfigError):
    pass


class DimensionMismatch(FedForgeError):
    pass


class NonFiniteLoss(FedForgeError):
    pass


class EmptyInput(FedForgeError):
    pass


class NonFiniteInput(FedForgeError):
    pass


class BadFraction(FedForgeError):
    pass


class CorruptPayload(FedForgeError):
    pass


class MalformedFrame(FedForgeError):
    pass


class UnknownType(MalformedFrame):
    pass


class LengthMismatch(MalformedFrame):
    pass


class EmptyRoster(FedForgeError):
    pass


class UnknownClient(FedForgeError):
    pass


class EmptyUpdateSet(FedForgeError):
    pass


class GatewayUnreachable(FedForgeError):
    pass


class InvalidLlmOutput(FedForgeError):
    pass


class UnrecognizedIntent(FedForgeError):
    pass


class InvalidArchitecture(FedForgeError):
    pass


class MissingDataConfig(FedForgeError):
    pass


class MalformedDataConfig(FedForgeError):
    pass


class NoClientsAvailable(FedForgeError):
    pass


class AllClientsTimedOut(FedForgeError):
    pass


class AllModelsInvalid(FedForgeError):
    pass


class DivergentCandidate(FedForgeError):
    pass


class StorageFailure(FedForgeError):
    pass
