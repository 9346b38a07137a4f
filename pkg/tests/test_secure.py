import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tickdrift.kernel import Kernel, TaskState, TimerCommand, LISTS_SWITCHED
from tickdrift.mcu import Delivery, Mcu, Routing
from tickdrift.oracle import compare, random_kernel, replay, round_robin_bruteforce, sweep
from tickdrift.rng import make_rng
from tickdrift.secure import (
    AddressMap,
    Mode,
    ReconciliationState,
    SecureFault,
    SecureService,
    SecureWorld,
    reconstruction_sweep,
    round_robin_closed_form,
    secure_tick_handler,
    validate_address,
)
from tickdrift.timebase import ms

AMAP = AddressMap.default()
ADDR = AMAP.nonsecure_low + 0x1000
T = ms(0.1)


def kernel_with(*prios, **kw):
    k = Kernel(**kw)
    for i, p in enumerate(prios):
        k.add_task(i, p, ADDR + 0x40 * i)
    k.schedule()
    return k


def intercept(k, n):
    recon = ReconciliationState(k.tick_count, k.slice_remaining)
    for _ in range(n):
        secure_tick_handler(recon, k)
    return recon


@pytest.mark.parametrize("n, q, s, expected", [
    (9, 5, 2, (2, 3)),
    (5, 5, 5, (1, 5)),
    (3, 10, 7, (0, 4)),
    (0, 4, 1, (0, 1)),
])
def test_round_robin_closed_form_examples(n, q, s, expected):
    assert round_robin_closed_form(n, q, s) == expected
    assert round_robin_bruteforce(n, q, s) == expected


def test_sweep_rotates_head_by_m():
    k = kernel_with(2, 2, 2, slice_quantum=5)
    k.slice_remaining = 2
    recon = intercept(k, 9)
    report = reconstruction_sweep(recon, k, AMAP)
    assert (report.rotations, report.new_slice) == (2, 3)
    assert k.ready[2] == [2, 0, 1]
    assert k.slice_remaining == 3 and k.pend_reschedule


def test_sweep_without_rotation_decrements_slice():
    k = kernel_with(2, 2, slice_quantum=10)
    k.slice_remaining = 7
    report = reconstruction_sweep(intercept(k, 3), k, AMAP)
    assert report.rotations == 0 and k.slice_remaining == 4
    assert k.ready[2] == [0, 1] and not k.pend_reschedule


def test_sweep_promotes_like_per_tick_replay():
    k = kernel_with(1, 3)
    k.schedule()
    k.block_with_timeout(1, 2)
    k.schedule()
    ref = replay(k, 10)
    swept = k.copy()
    report = reconstruction_sweep(intercept(swept, 10), swept, AMAP)
    assert report.promoted == [1] and report.reschedule
    assert compare(swept, ref) == []


def test_secure_tick_handler_only_touches_counter():
    k = kernel_with(1, 2)
    k.block_with_timeout(1, 1)
    before = k.snapshot()
    recon = intercept(k, 1)
    after = k.snapshot()
    assert recon.intercepted_ticks == 1 and after["tick_count"] == 1
    assert {key for key in before if before[key] != after[key]} == {"tick_count"}
    with pytest.raises(SecureFault):
        recon.active = False
        secure_tick_handler(recon, k)


def test_wrap_sets_flag_without_swapping():
    k = kernel_with(1, 2, width=8)
    k.tick_count = k.timer_time = 254
    k.block_with_timeout(1, 5)  # wake 3, overflow list
    ovf = list(k.overflow_delayed)
    recon = intercept(k, 4)
    assert recon.overflow_flag and k.tick_count == 2
    assert k.overflow_delayed == ovf and k.overflow_count == 0
    report = reconstruction_sweep(recon, k, AMAP)
    assert report.overflow and report.promoted == []
    assert k.overflow_count == 1 and k.delayed == ovf and k.overflow_delayed == []
    assert k.timer_queue == [TimerCommand.advance(4), LISTS_SWITCHED]


def test_sweep_enqueues_single_timer_command():
    k = kernel_with(1)
    k.add_timer(7, period=100)
    reconstruction_sweep(intercept(k, 300), k, AMAP)
    assert k.timer_queue == [TimerCommand.advance(300)]
    assert k.timer_service_run() == [(100, 7), (200, 7), (300, 7)]


def test_zero_window_sweep_is_noop():
    k = kernel_with(1, 1)
    before = k.snapshot()
    report = reconstruction_sweep(intercept(k, 0), k, AMAP)
    assert report.n == 0 and k.snapshot() == before


def test_validate_address_examples():
    assert validate_address(AMAP, AMAP.nonsecure_low) is None
    assert validate_address(AMAP, AMAP.nonsecure_high - 1) is None
    assert validate_address(AMAP, AMAP.nonsecure_high) is not None
    with pytest.raises(ValueError):
        AddressMap(0x100, 0x200, {"tick_count": 0x300})


def test_redirected_link_faults_without_mutation():
    k = kernel_with(1, 2)
    k.block_with_timeout(1, 3)
    k.tasks[1].address = 0x3000_0000  # secure alias
    recon = intercept(k, 5)
    before = k.snapshot()
    report = reconstruction_sweep(recon, k, AMAP)
    assert report.aborted and len(report.faults) == 1
    assert report.faults[0].address == 0x3000_0000
    assert k.snapshot() == before


def test_enter_and_exit_compensated():
    k = kernel_with(1)
    mcu = Mcu.with_period(T)
    world = SecureWorld(AMAP)
    world.enter(SecureService(0, 3 * T), k, mcu, Mode.COMPENSATED)
    assert mcu.nvic.routing is Routing.SECURE and mcu.nvic.nonsecure_masked
    with pytest.raises(SecureFault):
        world.enter(SecureService(1, T), k, mcu, Mode.COMPENSATED)
    for i in range(1, 4):
        assert mcu.expire(i * T) is Delivery.SECURE
        world.tick(k)
    world.finish(k)
    assert world.exit(mcu, 3 * T) == 0
    assert k.tick_count == 3 and mcu.nvic.routing is Routing.NONSECURE
    assert not mcu.nvic.nonsecure_masked and not world.active


def test_enter_and_exit_uncompensated():
    k = kernel_with(1)
    mcu = Mcu.with_period(T)
    world = SecureWorld(AMAP)
    world.enter(SecureService(0, 3 * T), k, mcu, Mode.UNCOMPENSATED)
    assert mcu.nvic.routing is Routing.NONSECURE
    outcomes = [mcu.expire(i * T) for i in range(1, 4)]
    assert outcomes.count(Delivery.DISCARDED) == 2
    world.finish(k)
    assert world.exit(mcu, 3 * T) == 1


def test_exit_with_reschedule_switches_on_return():
    k = kernel_with(1, 5)
    k.block_with_timeout(1, 2)
    k.schedule()
    assert k.running == 0
    mcu = Mcu.with_period(T)
    world = SecureWorld(AMAP)
    world.enter(SecureService(0, 4 * T), k, mcu, Mode.COMPENSATED)
    for i in range(1, 5):
        mcu.expire(i * T)
        world.tick(k)
    world.finish(k)
    world.exit(mcu, 4 * T)
    assert k.pend_reschedule
    assert k.schedule() == 1


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**63 - 1))
def test_sweep_equals_replay(seed):
    rng = make_rng(seed)
    k = random_kernel(rng)
    n = int(rng.integers(0, 5 * k.slice_quantum + 4))
    swept, report = sweep(k, n)
    assert not report.aborted
    assert compare(swept, replay(k, n)) == []


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), n=st.integers(256, 700))
def test_sweep_equals_replay_across_multiple_wraps(seed, n):
    k = random_kernel(make_rng(seed))
    if k.width != 8:
        k = Kernel(width=8, slice_quantum=k.slice_quantum)
    swept, _ = sweep(k, n)
    assert compare(swept, replay(k, n)) == []
