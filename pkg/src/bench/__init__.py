# src/bench/__init__.py
# Nothing is imported here: src.bench.settings must not load before the CLI has read .env.
