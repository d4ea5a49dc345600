//! Optional loopback transport: ships envelopes in wire format over N
//! concurrent local TCP connections, one per packet. Fault injection stays in
//! the simulator; this only proves the format survives a real socket.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use thiserror::Error;

use crate::pipeline::StegoEnvelope;
use crate::wire::{parse_envelope, serialize_envelope, WireError};

#[derive(Debug, Error)]
pub enum LoopbackError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("a transfer thread panicked")]
    ThreadPanic,
}

/// Send every envelope over its own localhost TCP connection, concurrently,
/// and collect what the listener side reads back. Arrival order is whatever
/// the sockets produce; the receiver pipeline does not care.
pub fn transfer(envelopes: &[StegoEnvelope]) -> Result<Vec<StegoEnvelope>, LoopbackError> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let expected = envelopes.len();

    let reader = thread::spawn(move || -> Result<Vec<StegoEnvelope>, LoopbackError> {
        let mut handles = Vec::with_capacity(expected);
        for _ in 0..expected {
            let (mut stream, _) = listener.accept()?;
            handles.push(thread::spawn(move || -> Result<StegoEnvelope, LoopbackError> {
                let mut text = String::new();
                stream.read_to_string(&mut text)?;
                Ok(parse_envelope(&text)?)
            }));
        }
        let mut received = Vec::with_capacity(expected);
        for handle in handles {
            received.push(handle.join().map_err(|_| LoopbackError::ThreadPanic)??);
        }
        Ok(received)
    });

    let senders: Vec<_> = envelopes
        .iter()
        .map(|e| {
            let payload = serialize_envelope(e);
            thread::spawn(move || -> Result<(), LoopbackError> {
                let mut stream = TcpStream::connect(addr)?;
                stream.write_all(payload.as_bytes())?;
                Ok(())
            })
        })
        .collect();
    for handle in senders {
        handle.join().map_err(|_| LoopbackError::ThreadPanic)??;
    }

    reader.join().map_err(|_| LoopbackError::ThreadPanic)?
}
