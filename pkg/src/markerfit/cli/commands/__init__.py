"""Commands large enough to live in their own module."""
