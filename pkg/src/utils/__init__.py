"""Shared utilities: configuration, structured logging, error hierarchy."""
