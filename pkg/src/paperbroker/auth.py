"""Credentials: password hashing, API keys, session tokens, derived ids.

Passwords are stored only as salted PBKDF2 hashes; the iteration count
is embedded in the stored hash so it can be raised without breaking
existing accounts. API keys and session tokens come from the OS CSPRNG
with 256 bits of entropy.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets

DEFAULT_ITERATIONS = 100_000


def derive_user_id(email: str) -> str:
    return "u" + hashlib.sha256(email.strip().casefold().encode()).hexdigest()[:12]


def derive_system_id(name: str) -> str:
    return "s" + hashlib.sha256(name.strip().casefold().encode()).hexdigest()[:12]


def new_api_key() -> str:
    return secrets.token_urlsafe(32)


def new_session_token() -> str:
    return secrets.token_urlsafe(32)


def hash_password(password: str, iterations: int = DEFAULT_ITERATIONS) -> tuple[str, str]:
    """Returns (salt, hash) where the hash embeds its iteration count."""
    salt = secrets.token_hex(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt.encode(), iterations)
    return salt, f"{iterations}${digest.hex()}"


def verify_password(password: str, salt: str, stored: str) -> bool:
    try:
        iterations_text, expected = stored.split("$", 1)
        iterations = int(iterations_text)
    except ValueError:
        return False
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt.encode(), iterations)
    return hmac.compare_digest(digest.hex(), expected)
