"""Token-bucket rate limiting for the socket harness."""

from __future__ import annotations

import time
from typing import Callable, Optional


class TokenBucket:
    """Classic token bucket measured in bits.

    Starts full unless ``initial`` is given. ``consume`` blocks (through the injected ``sleep``) until
    enough tokens have accumulated, so over any interval the delivered
    volume never exceeds ``rate * elapsed + burst``.
    """

    def __init__(self, rate: float, burst: float,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep,
                 initial: Optional[float] = None):
        if rate <= 0:
            raise ValueError("rate must be > 0")
        if burst <= 0:
            raise ValueError("burst must be > 0")
        self.rate = rate
        self.burst = burst
        self._clock = clock
        self._sleep = sleep
        self._tokens = burst if initial is None else min(burst, initial)
        self._stamp = clock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self.burst, self._tokens + (now - self._stamp) * self.rate)
        self._stamp = now

    def consume(self, bits: float) -> None:
        if bits > self.burst:
            raise ValueError(f"request of {bits} bits exceeds burst size {self.burst}")
        self._refill()
        # relative slack: a float-exact sleep can leave a sub-ulp deficit
        while bits - self._tokens > 1e-9 * bits:
            self._sleep((bits - self._tokens) / self.rate)
            self._refill()
        self._tokens -= bits


def shaped_send(sock, data: bytes, bucket: TokenBucket, chunk: int) -> None:
    """Write ``data`` in chunks of at most ``chunk`` bytes, paced by ``bucket``."""
    view = memoryview(data)
    for start in range(0, len(view), chunk):
        part = view[start:start + chunk]
        bucket.consume(len(part) * 8)
        sock.sendall(part)
