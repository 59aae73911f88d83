from enum import Enum
from sys import intern


class CoerciveEnum(Enum):
    """
    An enumeration that provides a helper to coerce strings into enumeration members.
    """

    @classmethod
    def coerce(cls, value):
        """
        Attempt to coerce `value` into a member of this enumeration.

        If value is already a member of this enumeration it is returned unchanged.
        Otherwise, if it is a string, attempt to convert it as an enumeration value
        (case insensitively, by downcasing). If that fails, attempt to convert it
        (case insensitively, by upcasing) as an enumeration name.

        Args:
            value (Enum, str): the value to be coerced.

        Raises:
            ValueError: if `value` is a string but neither a member by name nor value.
            TypeError: if `value`'s type is neither a member of the enumeration nor a
                string.
        """

        if isinstance(value, cls):
            return value

        if isinstance(value, str):
            try:
                return cls(value.strip().lower())
            except ValueError:
                pass
            try:
                return cls[value.strip().upper().replace("-", "_")]
            except KeyError:
                pass

            raise ValueError(f"{value} is not a valid {cls.__name__}")

        raise TypeError(f"{value} cannot convert to a {cls.__name__}")


class Task(CoerciveEnum):
    "Benchmark problems an experiment can be run on"

    XOR = intern("xor")
    "2-d XOR classification with a one-hidden-layer perceptron"

    LORENZ = intern("lorenz")
    "One-step-ahead forecasting of the Lorenz-63 trajectory with an RNN"

    ROSSLER = intern("rossler")
    "One-step-ahead forecasting of the Rössler trajectory with an RNN"

    @property
    def is_forecasting(self):
        return self in (self.LORENZ, self.ROSSLER)


class OptimizerId(CoerciveEnum):
    "Training algorithms that can be compared"

    WP = intern("wp")
    "Plain weight perturbation with a fixed learning rate"

    SWP = intern("swp")
    "Weight perturbation followed by a spectral-radius reset of the recurrent matrix"

    DOPAMINE1 = intern("dopamine1")
    "Weight perturbation with a learning rate tracking the regret average"

    DOPAMINE2 = intern("dopamine2")
    "Weight perturbation with a learning rate decaying towards the regret average"

    SGD = intern("sgd")
    "Exact gradients (backprop / BPTT) with plain gradient descent"

    ADAM = intern("adam")
    "Exact gradients (backprop / BPTT) with bias-corrected Adam"

    @property
    def is_perturbative(self):
        return self in (self.WP, self.SWP, self.DOPAMINE1, self.DOPAMINE2)

    @property
    def is_dopamine(self):
        return self in (self.DOPAMINE1, self.DOPAMINE2)


class DopamineVariant(CoerciveEnum):
    "Sign of the s-term in the learning-rate recurrence"

    TRACK = intern("dopamine1")
    "eta follows the regret: eta <- (1 - beta_eta) * eta - beta_eta * s"

    DECAY = intern("dopamine2")
    "eta decays towards the regret: eta <- (1 - beta_eta) * eta + beta_eta * s"


class Head(CoerciveEnum):
    "Output nonlinearity of a perceptron"

    SIGMOID_SOFTMAX = intern("sigmoid_softmax")
    "Elementwise sigmoid followed by a softmax"

    SOFTMAX = intern("softmax")
    "Plain softmax, kept for sanity comparisons"

    LINEAR = intern("linear")
    "No output nonlinearity (regression)"

    @property
    def is_probabilistic(self):
        return self in (self.SIGMOID_SOFTMAX, self.SOFTMAX)


class ParamRole(CoerciveEnum):
    "What a parameter matrix is used for inside a network"

    WEIGHT = intern("weight")
    BIAS = intern("bias")
    RECURRENT = intern("recurrent")


class TimingPhase(CoerciveEnum):
    "Which part of an optimizer iteration is timed"

    UPDATE = intern("update")
    "Backward pass / parameter update only"

    FULL = intern("full")
    "Forward computations and parameter update"


class RunStatus(CoerciveEnum):
    OK = intern("ok")
    DIVERGED = intern("diverged")


class LorenzForm(CoerciveEnum):
    "Which right-hand side is integrated for the Lorenz system"

    STANDARD = intern("standard")
    "dx = sigma(y - x), dy = x(rho - z) - y, dz = xy - beta z"

    PRINTED = intern("printed")
    "dx = sigma(x - y), dy = rho x - xz, dz = beta y - beta z (kept for inspection only)"


class Integrator(CoerciveEnum):
    EULER = intern("euler")
    RK4 = intern("rk4")


class CIMethod(CoerciveEnum):
    "How the 95% confidence interval of a mean is computed"

    NORMAL = intern("normal")
    "mean +/- 1.96 * SEM"

    STUDENT_T = intern("student_t")
    "mean +/- t(0.975, n - 1) * SEM"


class SpectralMethod(CoerciveEnum):
    POWER = intern("power")
    "Power iteration, falling back to Arnoldi then to a dense solver when it does not converge"

    ARNOLDI = intern("arnoldi")
    "Implicitly restarted Arnoldi (ARPACK), for the largest-magnitude eigenvalue only"

    DENSE = intern("dense")
    "Full eigenvalue decomposition"
