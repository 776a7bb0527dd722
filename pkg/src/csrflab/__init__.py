"""Self-contained CSRF laboratory.

A deliberately vulnerable forum service, an embedded-browser emulator,
a forged HTTP client, and a harness that replays four cross-site
request forgery scenarios against four server-side defenses.
"""

__version__ = "0.1.0"
