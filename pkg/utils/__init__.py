# Lie-bracket adaptive stabilization utilities
