"""AILinkPreviewer: link previews for pull-request code review."""

__version__ = "0.1.0"
