"""Exception types shared across the package."""


class SwarmRLError(Exception):
    """Base class for all package errors."""


class ShapeError(SwarmRLError, ValueError):
    """Array or parameter layout does not match what the operation expects."""


class NumericError(SwarmRLError, ArithmeticError):
    """A NaN or infinity showed up where only finite values are allowed."""


class ConfigError(SwarmRLError, ValueError):
    """Invalid configuration; ``problems`` lists every offending field."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ContractError(SwarmRLError, ValueError):
    """A caller violated an operation's precondition (e.g. invalid action)."""


class StaleCommitError(SwarmRLError):
    """A commit was rejected because its score is below the current best."""


class WorkerError(SwarmRLError, RuntimeError):
    """A worker failed mid-run; carries the agent id and its step count."""

    def __init__(self, agent_id: int, step: int, cause: BaseException):
        self.agent_id = agent_id
        self.step = step
        self.cause = cause
        super().__init__(f"agent {agent_id} failed at step {step}: {type(cause).__name__}: {cause}")
