"""Exception types shared across the simulator modules."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration input."""


class CollisionError(ValueError):
    """Two writes targeted the same resource element in one mapping call."""


class StaleCsiError(RuntimeError):
    """Combining was requested with missing or outdated channel state."""


class SingularChannelError(ArithmeticError):
    """Unregularized channel inversion hit a (near-)singular matrix."""

    def __init__(self, subcarrier: int, det_mag: float):
        self.subcarrier = subcarrier
        self.det_mag = det_mag
        super().__init__(
            f"channel Gram matrix singular at subcarrier {subcarrier} "
            f"(|det| = {det_mag:.3e}); use sigma > 0"
        )


class CapacityError(ValueError):
    """Transport block does not fit the scheduled allocation."""

class ScenarioError(RuntimeError):
    """A module error surfaced while running a scenario; carries frame/slot."""
