class DopaWPException(Exception):
    pass


class ShapeMismatchError(DopaWPException, ValueError):
    """Error is thrown when an array does not have the shape an operation expects"""

    def __init__(self, what, expected, actual):
        super().__init__()
        self.what = what
        self.expected = tuple(expected) if expected is not None else None
        self.actual = tuple(actual)

    def __repr__(self):
        return (
            f"{self.__class__.__name__}"
            f"({self.what!r}, {self.expected!r}, {self.actual!r})"
        )

    def __str__(self):
        if self.expected is None:
            return f"Invalid shape for {self.what}: {self.actual}"
        return f"Invalid shape for {self.what}: expected {self.expected}, got {self.actual}"


class InvalidHyperparameterError(DopaWPException, ValueError):
    """Error is thrown when an optimizer coefficient lies outside its valid range"""

    def __init__(self, name, value, constraint):
        super().__init__()
        self.name = name
        self.value = value
        self.constraint = constraint

    def __repr__(self):
        return (
            f"{self.__class__.__name__}"
            f"({self.name!r}, {self.value!r}, {self.constraint!r})"
        )

    def __str__(self):
        return f"Invalid value for {self.name}: {self.value} (must satisfy {self.constraint})"


class NonFiniteError(DopaWPException, ArithmeticError):
    """Error is thrown when a loss, a regret or updated parameters stop being finite"""

    def __init__(self, what, value=None):
        super().__init__()
        self.what = what
        self.value = value

    def __repr__(self):
        return f"{self.__class__.__name__}({self.what!r}, {self.value!r})"

    def __str__(self):
        if self.value is None:
            return f"Non-finite {self.what}"
        return f"Non-finite {self.what}: {self.value}"


class ProbabilityRangeError(DopaWPException, ValueError):
    pass


class DivergenceError(NonFiniteError):
    """Error is thrown when an ODE integration leaves the finite range"""

    def __init__(self, what, step):
        super().__init__(what)
        self.step = step

    def __repr__(self):
        return f"{self.__class__.__name__}({self.what!r}, {self.step!r})"

    def __str__(self):
        return f"{self.what} diverged at step {self.step}"


class EmptyWindowError(DopaWPException, ValueError):
    pass


class SpectralResetError(DopaWPException, ArithmeticError):
    pass


class MemoryBudgetExceededError(DopaWPException, MemoryError):
    """Error is thrown when the hidden-state history of an unrolled RNN would exceed the memory cap"""

    def __init__(self, required_bytes, cap_bytes):
        super().__init__()
        self.required_bytes = required_bytes
        self.cap_bytes = cap_bytes

    def __repr__(self):
        return f"{self.__class__.__name__}({self.required_bytes!r}, {self.cap_bytes!r})"

    def __str__(self):
        return (
            f"Unrolling requires {self.required_bytes} bytes of hidden-state history,"
            f" above the memory cap of {self.cap_bytes} bytes"
        )


class InsufficientRunsError(DopaWPException, ValueError):
    pass


class ConfigError(DopaWPException):
    pass


class UnknownPresetError(ConfigError):
    """Error is thrown when a preset name is not defined in the presets file"""

    def __init__(self, name, known=()):
        super().__init__()
        self.name = name
        self.known = tuple(known)

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name!r})"

    def __str__(self):
        res = f"Unknown preset: {self.name}"
        if self.known:
            res += f" (available: {', '.join(self.known)})"
        return res


class MismatchedTasksError(ConfigError):
    pass
