from typing import Any, Dict, Optional


class StatmapError(Exception):
    exit_code = 4

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": type(self).__name__,
            "message": str(self),
            "exit_code": self.exit_code,
        }


class ConfigurationError(StatmapError):
    exit_code = 3


class ScenarioError(ConfigurationError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["pointer"] = self.pointer
        return data


class SizeError(ConfigurationError):
    pass


class NumericError(StatmapError):
    exit_code = 4


class DomainViolationError(NumericError):
    def __init__(self, message: str, node: Optional[tuple] = None):
        if node is not None:
            message = f"{message} (node {node})"
        super().__init__(message)
        self.node = node

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        if self.node is not None:
            data["node"] = [int(i) for i in self.node]
        return data


class StructuralError(NumericError):
    pass


class FlowDivergenceError(NumericError):
    pass


class NonPeriodicFieldError(NumericError):
    pass


class AssertionFailure(StatmapError):
    exit_code = 2


__all__ = [
    'StatmapError', 'ConfigurationError', 'ScenarioError', 'SizeError',
    'NumericError', 'DomainViolationError', 'StructuralError',
    'FlowDivergenceError', 'NonPeriodicFieldError', 'AssertionFailure',
]
