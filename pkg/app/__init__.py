# Zakai Filter Engine
# Divergence-form filtering equations for partially observable diffusions
