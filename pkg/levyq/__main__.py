"""CLI entrypoint for python -m levyq."""

from levyq.cli import app

if __name__ == "__main__":
    app()
