class ManualClock:
    """Clock for driving the store without an event loop."""

    def __init__(self, now: float = 0.0):
        self.now = now

    def advance_to(self, t: float) -> None:
        if t > self.now:
            self.now = t
