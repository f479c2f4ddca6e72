# utils/errors.py
"""
Error categories for the zero-shot toolkit

Every failure the library raises on purpose is a ZslError subclass. The
`category` attribute is the stable, machine-parsable name the CLI prints
on stderr ("error: <category>: <message>").
"""

from typing import Optional


class ZslError(Exception):
    """Base class for all toolkit errors"""

    category = "ZslError"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def cli_line(self) -> str:
        """Single-line form written to stderr by the CLI"""
        text = " ".join(self.message.splitlines())
        return f"error: {self.category}: {text}"


# ----------------------------------------------------------------------------
# linear algebra
# ----------------------------------------------------------------------------

class NonSymmetric(ZslError):
    category = "NonSymmetric"


class NoConvergence(ZslError):
    category = "NoConvergence"


class NotPositiveDefinite(ZslError):
    category = "NotPositiveDefinite"


class SingularPencil(ZslError):
    category = "SingularPencil"


class SingularGram(ZslError):
    category = "SingularGram"


class DimensionMismatch(ZslError):
    category = "DimensionMismatch"


# ----------------------------------------------------------------------------
# text pipeline
# ----------------------------------------------------------------------------

class EmptyVocabulary(ZslError):
    category = "EmptyVocabulary"


class AllZeroColumn(ZslError):
    category = "AllZeroColumn"

    def __init__(self, class_id: str):
        super().__init__(
            f"document for class '{class_id}' has no in-vocabulary token",
            class_id=class_id,
        )
        self.class_id = class_id


# ----------------------------------------------------------------------------
# evaluation / cross-validation
# ----------------------------------------------------------------------------

class TooFewClasses(ZslError):
    category = "TooFewClasses"


class EmptyTestSet(ZslError):
    category = "EmptyTestSet"


class AllCellsFailed(ZslError):
    """Every grid cell failed on at least one fold"""
    category = "AllCellsFailed"


# ----------------------------------------------------------------------------
# data io
# ----------------------------------------------------------------------------

class ParseError(ZslError):
    category = "ParseError"

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}", path=path, line=line)
        self.path = path
        self.line = line


class NonFiniteValue(ZslError):
    category = "NonFiniteValue"


class UnknownClass(ZslError):
    category = "UnknownClass"

    def __init__(self, name: str, line: int):
        super().__init__(f"unknown class '{name}' at line {line}", name=name, line=line)
        self.name = name
        self.line = line


class SchemaVersionMismatch(ZslError):
    category = "SchemaVersionMismatch"


class MissingFile(ZslError):
    category = "MissingFile"


class InvalidConfig(ZslError):
    category = "InvalidConfig"
