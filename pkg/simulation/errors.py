class SimulationError(Exception):
    """Base class for scale simulation failures"""
    code = "SIMULATION_ERROR"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InvalidSimConfig(SimulationError):
    code = "INVALID_SIM_CONFIG"


class EventLogViolation(SimulationError):
    """The event log breaks a dispatcher or conservation property"""
    code = "EVENT_LOG_VIOLATION"
