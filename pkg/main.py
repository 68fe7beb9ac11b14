"""
Root entry point for the Zakai Filter Engine.
Run with: python main.py <subcommand> --config scenario.yaml --seed 1
"""

# Re-export the CLI from the modular package
from app.main import cli

__all__ = ["cli"]

if __name__ == "__main__":
    cli()
