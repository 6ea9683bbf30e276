# Shared utilities and configuration helpers for clusterfuse
