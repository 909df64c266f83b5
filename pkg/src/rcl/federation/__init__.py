"""Federated execution: partitioning, RTI, simulated and TCP transports."""
