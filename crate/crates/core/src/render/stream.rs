//! Frame streaming: renders a trial into a ring buffer and hands each new
//! frame to a consumer, either paced to the wall clock or as fast as
//! possible.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{FrameRingBuffer, RenderError, Renderer, SimClock};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    /// Producer and consumer run in lockstep on the calling thread.
    FastForward,
    /// A producer thread emits one frame per wall interval.
    RealTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StreamStats {
    pub frames_produced: u64,
    pub frames_consumed: u64,
    /// Mean wall time between produced frames, seconds.
    pub mean_wall_interval_s: f64,
}

/// Upper bound on pooled frames per thread.
const SPARE_LIMIT: usize = 64;

thread_local! {
    /// Frame allocations reused across streams on the same thread, so batch
    /// runs do not pay for fresh multi-megabyte buffers every trial.
    static SPARE_FRAMES: std::cell::RefCell<Vec<Frame>> = const { std::cell::RefCell::new(Vec::new()) };
}

#[derive(Debug, Clone, Copy)]
pub struct Streamer {
    pub clock: SimClock,
    pub pacing: Pacing,
    pub capacity: usize,
}

impl Streamer {
    pub fn new(clock: SimClock, pacing: Pacing, capacity: usize) -> Self {
        Self { clock, pacing, capacity }
    }

    /// Streams frames `0..n_frames`. `consume` sees every frame in index
    /// order together with a buffer snapshot that contains it; returning
    /// `Ok(true)` stops the stream.
    pub fn run<E, F>(&self, renderer: &Renderer, n_frames: u64, consume: F) -> Result<StreamStats, E>
    where
        E: From<RenderError>,
        F: FnMut(&FrameRingBuffer, &Arc<Frame>) -> Result<bool, E>,
    {
        match self.pacing {
            Pacing::FastForward => self.run_lockstep(renderer, n_frames, consume),
            Pacing::RealTime => self.run_paced(renderer, n_frames, consume),
        }
    }

    fn run_lockstep<E, F>(&self, renderer: &Renderer, n_frames: u64, mut consume: F) -> Result<StreamStats, E>
    where
        E: From<RenderError>,
        F: FnMut(&FrameRingBuffer, &Arc<Frame>) -> Result<bool, E>,
    {
        let mut buffer = FrameRingBuffer::new(self.capacity)?;
        let mut stats = StreamStats { mean_wall_interval_s: self.clock.wall_interval_s, ..Default::default() };
        let result = self.lockstep_loop(renderer, n_frames, &mut buffer, &mut stats, &mut consume);
        // Frames nobody else holds go back to this thread's pool.
        let mut frames: Vec<Frame> = Vec::new();
        while let Some(f) = buffer.pop_oldest() {
            frames.extend(Arc::try_unwrap(f).ok());
        }
        SPARE_FRAMES.with(|p| {
            let mut p = p.borrow_mut();
            let room = SPARE_LIMIT.saturating_sub(p.len());
            p.extend(frames.into_iter().take(room));
        });
        result.map(|_| stats)
    }

    fn lockstep_loop<E, F>(
        &self,
        renderer: &Renderer,
        n_frames: u64,
        buffer: &mut FrameRingBuffer,
        stats: &mut StreamStats,
        consume: &mut F,
    ) -> Result<(), E>
    where
        E: From<RenderError>,
        F: FnMut(&FrameRingBuffer, &Arc<Frame>) -> Result<bool, E>,
    {
        let mut spare: Option<Frame> = None;
        for i in 0..n_frames {
            let recycled = spare.take().or_else(|| SPARE_FRAMES.with(|p| p.borrow_mut().pop()));
            let mut frame = match recycled {
                Some(mut f) => {
                    renderer.render_into(i, &mut f);
                    f
                }
                None => renderer.render(i),
            };
            frame.sim_time_s = self.clock.sim_time(i);
            frame.wall_time_s = i as f64 * self.clock.wall_interval_s;
            let frame = Arc::new(frame);
            if let Some(old) = buffer.push_shared(frame.clone())? {
                spare = Arc::try_unwrap(old).ok();
            }
            stats.frames_produced += 1;
            stats.frames_consumed += 1;
            if consume(buffer, &frame)? {
                break;
            }
        }
        Ok(())
    }

    fn run_paced<E, F>(&self, renderer: &Renderer, n_frames: u64, mut consume: F) -> Result<StreamStats, E>
    where
        E: From<RenderError>,
        F: FnMut(&FrameRingBuffer, &Arc<Frame>) -> Result<bool, E>,
    {
        let shared = (Mutex::new(FrameRingBuffer::new(self.capacity)?), Condvar::new());
        let stop = AtomicBool::new(false);
        let interval = Duration::from_secs_f64(self.clock.wall_interval_s);
        let clock = self.clock;

        std::thread::scope(|scope| {
            let producer = scope.spawn(|| {
                let start = Instant::now();
                let mut produced = 0u64;
                for i in 0..n_frames {
                    if stop.load(Ordering::Acquire) {
                        break;
                    }
                    let mut frame = renderer.render(i);
                    let due = start + interval * i as u32;
                    if let Some(wait) = due.checked_duration_since(Instant::now()) {
                        std::thread::sleep(wait);
                    }
                    frame.sim_time_s = clock.sim_time(i);
                    frame.wall_time_s = start.elapsed().as_secs_f64();
                    let (lock, cv) = &shared;
                    lock.lock().unwrap().push(frame).expect("producer indices are contiguous");
                    cv.notify_all();
                    produced += 1;
                }
                let elapsed = start.elapsed().as_secs_f64();
                // Wake a consumer waiting on a frame that will never come.
                stop.store(true, Ordering::Release);
                shared.1.notify_all();
                (produced, elapsed)
            });

            let mut consumed = 0u64;
            let mut result: Result<(), E> = Ok(());
            for i in 0..n_frames {
                let snapshot = {
                    let (lock, cv) = &shared;
                    let mut guard = lock.lock().unwrap();
                    while guard.head().is_none_or(|h| h < i) && !stop.load(Ordering::Acquire) {
                        guard = cv.wait(guard).unwrap();
                    }
                    if guard.head().is_none_or(|h| h < i) {
                        break;
                    }
                    guard.clone()
                };
                let Some(frame) = snapshot.get(i).cloned() else {
                    result = Err(RenderError::FrameDropped(i).into());
                    break;
                };
                consumed += 1;
                match consume(&snapshot, &frame) {
                    Ok(false) => {}
                    Ok(true) => break,
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                }
            }
            stop.store(true, Ordering::Release);
            let (produced, elapsed) = producer.join().expect("producer thread panicked");
            result.map(|_| StreamStats {
                frames_produced: produced,
                frames_consumed: consumed,
                mean_wall_interval_s: if produced > 1 { elapsed / (produced - 1) as f64 } else { 0.0 },
            })
        })
    }
}
