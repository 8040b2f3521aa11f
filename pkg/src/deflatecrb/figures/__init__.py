"""Packaged scenarios reproducing the published figures."""
