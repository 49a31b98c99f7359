import hashlib
import json

def derive_seed(seed: int, *parts) -> int:
    """Derive a child seed from a parent seed and a path of labels"""
    normalized = json.dumps({"seed": seed, "parts": list(parts)}, sort_keys=True, default=str)
    return int(hashlib.sha256(normalized.encode()).hexdigest()[:16], 16)
