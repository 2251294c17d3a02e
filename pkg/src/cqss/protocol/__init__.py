"""Circular secret-sharing session engine, sampling checks and key handling."""

from .config import BLOCK_SIZE, ProtocolConfig, Variant, combine_digits, reduce_digits
from .transcript import ABSENT, AgentEntry, Mode, RoundRecord, SessionTranscript
from .engine import (
    BASES,
    CODING_OPS,
    U0,
    U1,
    CodeResult,
    ControlResult,
    agent_step,
    alice_prepare,
    run_round,
    run_session,
)
from .sampling import S1Sample, S2Sample, SampleReport, alice_digits, check_samples
from .keys import (
    KeyLengthError,
    KeyMaterial,
    VerificationResult,
    digits_to_text,
    otp_reconstruct,
    otp_split,
    sift_keys,
    text_to_digits,
    verify_key_agreement,
)
from .io import dumps_transcript, read_transcript, write_samples, write_transcript
