"""Deterministic packet and fuzz-input generators shared by the codec tests."""

import random

from hecredit import mqtt_codec as mc

_TOPIC_ALPHABET = "abcxyz/_-0123456789é€"


def _topic(rng):
    return "".join(rng.choice(_TOPIC_ALPHABET) for _ in range(rng.randint(1, 30)))


def random_packet(rng: random.Random):
    kind = rng.randrange(8)
    if kind == 0:
        return mc.Connect(_topic(rng).replace("/", "")[:23], rng.randrange(1 << 16), rng.random() < 0.5)
    if kind == 1:
        return mc.ConnAck(rng.randrange(6), rng.random() < 0.5)
    if kind == 2:
        return mc.Subscribe(rng.randint(1, 0xFFFF),
                            tuple((_topic(rng), rng.randrange(3)) for _ in range(rng.randint(1, 4))))
    if kind == 3:
        return mc.SubAck(rng.randint(1, 0xFFFF), tuple(rng.choice((0, 1, 2, 0x80)) for _ in range(rng.randint(1, 4))))
    if kind == 4:
        n = rng.choice((0, 1, 127, 128, rng.randrange(2000), 16384))
        return mc.Publish(_topic(rng), rng.randbytes(n))
    return (mc.PingReq(), mc.PingResp(), mc.Disconnect())[kind - 5]


def fuzz_inputs(n, seed):
    rng = random.Random(seed)
    valid = [mc.encode(p) for p in (mc.PingReq(), mc.Connect("x"), mc.Publish("a/b", b"hello"),
                                    mc.Subscribe(7, (("a", 0),)), mc.SubAck(7, (0,)), mc.ConnAck())]
    for i in range(n):
        mode = i % 3
        if mode == 0:
            yield rng.randbytes(rng.randint(0, 24))
        elif mode == 1:
            b = bytearray(rng.choice(valid))
            for _ in range(rng.randint(1, 3)):
                b[rng.randrange(len(b))] = rng.getrandbits(8)
            yield bytes(b)
        else:
            # plausible header with a random body
            head = bytes([rng.choice([0x10, 0x20, 0x30, 0x82, 0x90, 0xC0, 0xD0, 0xE0])])
            body = rng.randbytes(rng.randint(0, 20))
            yield head + mc.encode_remaining_length(len(body)) + body
