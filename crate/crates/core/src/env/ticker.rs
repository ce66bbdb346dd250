use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use super::{EnvError, EnvStatus, Environment, WallClock};
use crate::action::ActionCommand;
use crate::frame::{Frame, SurfaceBounds};

/// Handle to a queued command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CommandTicket(u64);

struct Queued {
    seq: u64,
    atoms: VecDeque<(ActionCommand, u64)>,
}

struct Active {
    seq: u64,
    atoms: VecDeque<(ActionCommand, u64)>,
    remaining_ms: u64,
}

#[derive(Default)]
struct TickerState {
    queue: VecDeque<Queued>,
    next_seq: u64,
    finished: HashMap<u64, Result<(), EnvError>>,
    ticks: u64,
    /// Wall-clock deadline the thread is currently sleeping towards.
    waiting_for_ms: Option<u64>,
    paused: bool,
    exited: bool,
}

struct Shared {
    env: Mutex<Box<dyn Environment>>,
    state: Mutex<TickerState>,
    changed: Condvar,
    stop: AtomicBool,
}

/// Drives an environment on its own thread, one `tick_ms` step per tick of
/// wall time, whatever the agent is doing. It is the environment's only
/// writer: commands are queued and started at tick boundaries in arrival
/// order, and a command's chords never interleave with another command's.
pub struct RealtimeTicker {
    shared: Arc<Shared>,
    clock: Arc<dyn WallClock>,
    tick_ms: u64,
    thread: Option<JoinHandle<()>>,
}

impl RealtimeTicker {
    pub fn spawn(env: Box<dyn Environment>, clock: Arc<dyn WallClock>, tick_ms: u64) -> Self {
        assert!(tick_ms > 0, "tick must be positive");
        let shared = Arc::new(Shared {
            env: Mutex::new(env),
            state: Mutex::new(TickerState::default()),
            changed: Condvar::new(),
            stop: AtomicBool::new(false),
        });
        let thread = {
            let shared = Arc::clone(&shared);
            let clock = Arc::clone(&clock);
            std::thread::Builder::new()
                .name("realtime-ticker".into())
                .spawn(move || run_ticks(&shared, clock.as_ref(), tick_ms))
                .expect("spawn ticker thread")
        };
        RealtimeTicker {
            shared,
            clock,
            tick_ms,
            thread: Some(thread),
        }
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    pub fn clock(&self) -> &Arc<dyn WallClock> {
        &self.clock
    }

    /// Queues a command. Invalid commands finish immediately with an error.
    pub fn submit(&self, command: &ActionCommand) -> CommandTicket {
        let bounds = self.surface_bounds();
        let mut st = self.shared.state.lock().unwrap();
        let seq = st.next_seq;
        st.next_seq += 1;
        match command.validate(bounds) {
            Ok(()) => st.queue.push_back(Queued {
                seq,
                atoms: command.atoms().into(),
            }),
            Err(e) => {
                st.finished
                    .insert(seq, Err(EnvError::CommandRejected(e.to_string())));
            }
        }
        CommandTicket(seq)
    }

    pub fn result(&self, ticket: CommandTicket) -> Option<Result<(), EnvError>> {
        self.shared.state.lock().unwrap().finished.get(&ticket.0).cloned()
    }

    /// Lets wall time pass (through the clock, so a virtual clock advances)
    /// until the command has fully played out.
    pub fn wait_for(&self, ticket: CommandTicket) -> Result<(), EnvError> {
        loop {
            self.sync();
            if let Some(r) = self.result(ticket) {
                return r;
            }
            if self.shared.state.lock().unwrap().exited {
                return Err(EnvError::Fault("ticker stopped".into()));
            }
            self.clock.sleep_ms(self.tick_ms);
        }
    }

    /// Blocks until every tick due at the current wall time has run.
    pub fn sync(&self) {
        let mut st = self.shared.state.lock().unwrap();
        loop {
            if st.exited {
                return;
            }
            if st.waiting_for_ms.is_some_and(|d| d > self.clock.now_ms()) {
                return;
            }
            st = self
                .shared
                .changed
                .wait_timeout(st, Duration::from_millis(5))
                .unwrap()
                .0;
        }
    }

    /// Environment steps taken so far.
    pub fn ticks(&self) -> u64 {
        self.shared.state.lock().unwrap().ticks
    }

    pub fn game_time_ms(&self) -> u64 {
        self.ticks() * self.tick_ms
    }

    /// While paused, ticks still elapse but the environment is not stepped
    /// and queued commands wait.
    pub fn set_paused(&self, paused: bool) {
        self.shared.state.lock().unwrap().paused = paused;
    }

    pub fn snapshot(&self) -> Frame {
        self.shared.env.lock().unwrap().snapshot()
    }

    pub fn status(&self) -> EnvStatus {
        self.shared.env.lock().unwrap().status()
    }

    pub fn loss_count(&self) -> u64 {
        self.shared.env.lock().unwrap().loss_count()
    }

    pub fn surface_bounds(&self) -> SurfaceBounds {
        self.shared.env.lock().unwrap().surface_bounds()
    }

    /// Stops the thread and hands the environment back.
    pub fn stop(mut self) -> Box<dyn Environment> {
        self.shutdown();
        let shared = Arc::clone(&self.shared);
        drop(self);
        match Arc::try_unwrap(shared) {
            Ok(shared) => shared.env.into_inner().unwrap(),
            Err(_) => unreachable!("ticker thread joined; no other owners"),
        }
    }

    fn shutdown(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        self.shared.changed.notify_all();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for RealtimeTicker {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn run_ticks(shared: &Shared, clock: &dyn WallClock, tick_ms: u64) {
    let start = clock.now_ms();
    let mut slot: u64 = 0;
    let mut active: Option<Active> = None;
    let stopped = || shared.stop.load(Ordering::SeqCst);
    loop {
        let deadline = start + (slot + 1) * tick_ms;
        {
            let mut st = shared.state.lock().unwrap();
            st.waiting_for_ms = Some(deadline);
        }
        shared.changed.notify_all();
        if !clock.wait_until(deadline, &stopped) {
            break;
        }
        slot += 1;
        let mut st = shared.state.lock().unwrap();
        st.waiting_for_ms = None;
        if stopped() {
            break;
        }
        if st.paused {
            continue;
        }
        let mut env = shared.env.lock().unwrap();
        start_pending(&mut st, &mut active, env.as_mut());
        if let Err(e) = env.advance(tick_ms) {
            log::error!("environment failed to advance: {e}");
            fail_all(&mut st, &mut active, e);
        }
        st.ticks += 1;
        if let Some(a) = active.as_mut() {
            if a.remaining_ms > 0 {
                a.remaining_ms = a.remaining_ms.saturating_sub(tick_ms);
                if a.remaining_ms == 0 {
                    let released = env.release();
                    if a.atoms.is_empty() || released.is_err() {
                        st.finished.insert(a.seq, released);
                        active = None;
                    }
                }
            }
        }
        drop(env);
        drop(st);
        shared.changed.notify_all();
    }
    let mut st = shared.state.lock().unwrap();
    st.exited = true;
    st.waiting_for_ms = None;
    drop(st);
    shared.changed.notify_all();
}

/// Applies atoms at a tick boundary until one with a duration is in
/// progress or the queue is empty. Instantaneous atoms apply and release
/// in place.
fn start_pending(st: &mut TickerState, active: &mut Option<Active>, env: &mut dyn Environment) {
    loop {
        if active.is_none() {
            match st.queue.pop_front() {
                Some(q) => {
                    *active = Some(Active {
                        seq: q.seq,
                        atoms: q.atoms,
                        remaining_ms: 0,
                    })
                }
                None => return,
            }
        }
        let a = active.as_mut().expect("set above");
        if a.remaining_ms > 0 {
            return;
        }
        let Some((atom, duration_ms)) = a.atoms.pop_front() else {
            st.finished.insert(a.seq, Ok(()));
            *active = None;
            continue;
        };
        let applied = env.apply(&atom).and_then(|()| {
            if duration_ms == 0 {
                env.release()
            } else {
                Ok(())
            }
        });
        match applied {
            Err(e) => {
                st.finished.insert(a.seq, Err(e));
                *active = None;
            }
            Ok(()) if duration_ms > 0 => {
                a.remaining_ms = duration_ms;
                return;
            }
            Ok(()) => {}
        }
    }
}

fn fail_all(st: &mut TickerState, active: &mut Option<Active>, e: EnvError) {
    if let Some(a) = active.take() {
        st.finished.insert(a.seq, Err(e.clone()));
    }
    while let Some(q) = st.queue.pop_front() {
        st.finished.insert(q.seq, Err(e.clone()));
    }
}
