# Shared utilities for logging, error handling and random-stream derivation
