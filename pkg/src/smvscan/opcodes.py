"""EVM opcode table and the feature-symbol classification sets."""

from __future__ import annotations

# opcode byte -> (mnemonic, stack items popped, stack items pushed)
TABLE: dict[int, tuple[str, int, int]] = {
    0x00: ("STOP", 0, 0),
    0x01: ("ADD", 2, 1),
    0x02: ("MUL", 2, 1),
    0x03: ("SUB", 2, 1),
    0x04: ("DIV", 2, 1),
    0x05: ("SDIV", 2, 1),
    0x06: ("MOD", 2, 1),
    0x07: ("SMOD", 2, 1),
    0x08: ("ADDMOD", 3, 1),
    0x09: ("MULMOD", 3, 1),
    0x0A: ("EXP", 2, 1),
    0x0B: ("SIGNEXTEND", 2, 1),
    0x10: ("LT", 2, 1),
    0x11: ("GT", 2, 1),
    0x12: ("SLT", 2, 1),
    0x13: ("SGT", 2, 1),
    0x14: ("EQ", 2, 1),
    0x15: ("ISZERO", 1, 1),
    0x16: ("AND", 2, 1),
    0x17: ("OR", 2, 1),
    0x18: ("XOR", 2, 1),
    0x19: ("NOT", 1, 1),
    0x1A: ("BYTE", 2, 1),
    0x1B: ("SHL", 2, 1),
    0x1C: ("SHR", 2, 1),
    0x1D: ("SAR", 2, 1),
    0x20: ("KECCAK256", 2, 1),
    0x30: ("ADDRESS", 0, 1),
    0x31: ("BALANCE", 1, 1),
    0x32: ("ORIGIN", 0, 1),
    0x33: ("CALLER", 0, 1),
    0x34: ("CALLVALUE", 0, 1),
    0x35: ("CALLDATALOAD", 1, 1),
    0x36: ("CALLDATASIZE", 0, 1),
    0x37: ("CALLDATACOPY", 3, 0),
    0x38: ("CODESIZE", 0, 1),
    0x39: ("CODECOPY", 3, 0),
    0x3A: ("GASPRICE", 0, 1),
    0x3B: ("EXTCODESIZE", 1, 1),
    0x3C: ("EXTCODECOPY", 4, 0),
    0x3D: ("RETURNDATASIZE", 0, 1),
    0x3E: ("RETURNDATACOPY", 3, 0),
    0x3F: ("EXTCODEHASH", 1, 1),
    0x40: ("BLOCKHASH", 1, 1),
    0x41: ("COINBASE", 0, 1),
    0x42: ("TIMESTAMP", 0, 1),
    0x43: ("NUMBER", 0, 1),
    0x44: ("PREVRANDAO", 0, 1),
    0x45: ("GASLIMIT", 0, 1),
    0x46: ("CHAINID", 0, 1),
    0x47: ("SELFBALANCE", 0, 1),
    0x48: ("BASEFEE", 0, 1),
    0x49: ("BLOBHASH", 1, 1),
    0x4A: ("BLOBBASEFEE", 0, 1),
    0x50: ("POP", 1, 0),
    0x51: ("MLOAD", 1, 1),
    0x52: ("MSTORE", 2, 0),
    0x53: ("MSTORE8", 2, 0),
    0x54: ("SLOAD", 1, 1),
    0x55: ("SSTORE", 2, 0),
    0x56: ("JUMP", 1, 0),
    0x57: ("JUMPI", 2, 0),
    0x58: ("PC", 0, 1),
    0x59: ("MSIZE", 0, 1),
    0x5A: ("GAS", 0, 1),
    0x5B: ("JUMPDEST", 0, 0),
    0x5C: ("TLOAD", 1, 1),
    0x5D: ("TSTORE", 2, 0),
    0x5E: ("MCOPY", 3, 0),
    0x5F: ("PUSH0", 0, 1),
    0xF0: ("CREATE", 3, 1),
    0xF1: ("CALL", 7, 1),
    0xF2: ("CALLCODE", 7, 1),
    0xF3: ("RETURN", 2, 0),
    0xF4: ("DELEGATECALL", 6, 1),
    0xF5: ("CREATE2", 4, 1),
    0xFA: ("STATICCALL", 6, 1),
    0xFD: ("REVERT", 2, 0),
    0xFE: ("INVALID", 0, 0),
    0xFF: ("SELFDESTRUCT", 1, 0),
}

for _i in range(1, 33):
    TABLE[0x5F + _i] = (f"PUSH{_i}", 0, 1)
for _i in range(1, 17):
    TABLE[0x7F + _i] = (f"DUP{_i}", _i, _i + 1)
    TABLE[0x8F + _i] = (f"SWAP{_i}", _i + 1, _i + 1)
for _i in range(0, 5):
    TABLE[0xA0 + _i] = (f"LOG{_i}", 2 + _i, 0)

PUSH0 = 0x5F
PUSH1 = 0x60
PUSH32 = 0x7F
DUP1 = 0x80
SWAP1 = 0x90

JUMP = 0x56
JUMPI = 0x57
JUMPDEST = 0x5B

STOP = 0x00
RETURN = 0xF3
REVERT = 0xFD
INVALID = 0xFE
SELFDESTRUCT = 0xFF

KECCAK256 = 0x20
POP = 0x50
MLOAD = 0x51
MSTORE = 0x52
MSTORE8 = 0x53
SLOAD = 0x54
SSTORE = 0x55
CALLDATALOAD = 0x35
CALLDATASIZE = 0x36
CALLDATACOPY = 0x37
CALLER = 0x33
CALLVALUE = 0x34
CALL = 0xF1
CALLCODE = 0xF2
DELEGATECALL = 0xF4
STATICCALL = 0xFA

# Opcodes that unconditionally end execution of the current path.
HALTS = frozenset({STOP, RETURN, REVERT, INVALID, SELFDESTRUCT})

# Opcodes that terminate a basic block.
BLOCK_ENDS = HALTS | {JUMP, JUMPI}

CALL_FAMILY = frozenset({CALL, CALLCODE, DELEGATECALL, STATICCALL})


def immediate_size(opcode: int) -> int:
    """Number of operand bytes following the opcode (PUSH1..PUSH32 only)."""
    if PUSH1 <= opcode <= PUSH32:
        return opcode - PUSH0
    return 0


def mnemonic(opcode: int) -> str:
    info = TABLE.get(opcode)
    return info[0] if info else f"UNKNOWN_0x{opcode:02x}"


def is_push(opcode: int) -> bool:
    return PUSH0 <= opcode <= PUSH32


def stack_effect(opcode: int) -> tuple[int, int]:
    """(pops, pushes) for a known opcode; unknown opcodes behave like INVALID."""
    info = TABLE.get(opcode)
    return (info[1], info[2]) if info else (0, 0)


# Intra-method feature classification.  Each set maps to one symbol of the
# 18-symbol signature alphabet; opcodes outside every set contribute nothing.
READ_OPS = frozenset({MLOAD, SLOAD})
WRITE_OPS = frozenset({MSTORE, SSTORE})
METHOD_CALL_OPS = frozenset({JUMP, JUMPI, JUMPDEST, CALL, STATICCALL, DELEGATECALL})
MESSAGE_CALL_OPS = frozenset(
    {CALLER, CALLDATASIZE, CALLDATALOAD, CALLVALUE, CALLDATACOPY, CALLCODE}
)
IF_OPS = frozenset({0x10, 0x11, 0x12, 0x13, 0x14, 0x15})  # LT GT SLT SGT EQ ISZERO
COMPARE_OPS = frozenset({0x10, 0x11, 0x12, 0x13, 0x14})  # binary comparisons
RETURN_OPS = frozenset({0x3D, 0xF3, 0x3E})  # RETURNDATASIZE RETURN RETURNDATACOPY
EVENT_OPS = frozenset(range(0xA0, 0xA5))
REVERT_OPS = frozenset({REVERT})
GAS_OPS = frozenset({0x5A, 0x3A, 0x45})  # GAS GASPRICE GASLIMIT

# Address range of the precompiled contracts recognised for P1..P9.
PRECOMPILE_LOW = 0x01
PRECOMPILE_HIGH = 0x09
