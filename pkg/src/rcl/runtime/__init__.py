"""Event queue, clocks and the discrete-event engine."""
