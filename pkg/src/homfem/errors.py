"""Exception hierarchy shared by all homfem modules."""


class HomfemError(Exception):
    """Base class for all errors raised by homfem."""


class ConfigError(HomfemError):
    """Invalid or inconsistent problem configuration.

    ``key`` holds the dotted path of the offending entry when known.
    """

    def __init__(self, msg, key=None):
        self.key = key
        if key:
            msg = f"{key}: {msg}"
        super().__init__(msg)


class ParseError(ConfigError):
    """Syntax error in one of the small configuration languages."""

    def __init__(self, msg, text=None, pos=None, line=None, column=None):
        self.text = text
        self.pos = pos
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        elif pos is not None:
            where.append(f"position {pos}")
        if where:
            msg = f"{msg} ({', '.join(where)})"
        super().__init__(msg)


class MeshError(HomfemError):
    """Malformed mesh data or mesh file."""


class SelectorError(HomfemError):
    """Region selector that cannot be evaluated on a mesh."""


class EmptyRegionError(SelectorError):
    """Region selector matched no mesh entity."""


class QuadratureError(HomfemError):
    """Requested quadrature or basis is not available."""


class InvertedCellError(HomfemError):
    """Cell with a non-positive Jacobian determinant."""


class TermError(HomfemError):
    """Unknown term, wrong arguments or inconsistent material data."""


class ConstraintError(HomfemError):
    """Boundary conditions that cannot be satisfied together."""


class SolverError(HomfemError):
    """Base class for linear and nonlinear solver failures."""

    def __init__(self, msg, **info):
        self.info = info
        super().__init__(msg)


class SingularMatrixError(SolverError):
    """The system matrix is (numerically) singular."""


class ConvergenceError(SolverError):
    """An iterative method did not reach its tolerance."""


class EngineError(HomfemError):
    """Homogenization engine failure."""


class DependencyCycleError(EngineError):
    """The requirement/coefficient graph contains a cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("dependency cycle: " + " -> ".join(self.cycle))


class TaskFailedError(EngineError):
    """One or more engine tasks failed.

    ``failures`` maps each failed node to ``(root_node, exception)``.
    """

    def __init__(self, failures):
        self.failures = dict(failures)
        lines = []
        for node, (root, exc) in sorted(self.failures.items()):
            if node == root:
                lines.append(f"{node}: {exc}")
            else:
                lines.append(f"{node}: failed due to {root}")
        super().__init__("; ".join(lines))


class PhaseError(HomfemError):
    """Error annotated with the processing phase it happened in."""

    def __init__(self, phase, cause):
        self.phase = phase
        self.cause = cause
        super().__init__(f"[{phase}] {type(cause).__name__}: {cause}")
