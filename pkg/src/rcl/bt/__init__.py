"""Behavior trees compiled to reactors, plus a reference interpreter."""
