use std::io::{BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};

use super::message::{read_frame, Message};
use super::{Channel, LinkStats, TransportError};

/// A framed TCP connection.
pub struct TcpLink {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    peer: SocketAddr,
    sent: LinkStats,
}

impl TcpLink {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, TransportError> {
        TcpLink::from_stream(TcpStream::connect(addr)?)
    }

    pub fn from_stream(stream: TcpStream) -> Result<Self, TransportError> {
        stream.set_nodelay(true)?;
        let peer = stream.peer_addr()?;
        Ok(TcpLink {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            peer,
            sent: LinkStats::default(),
        })
    }

    pub fn peer(&self) -> SocketAddr {
        self.peer
    }

    pub fn sent(&self) -> LinkStats {
        self.sent
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        let frame = msg.encode();
        self.writer.write_all(&frame)?;
        self.writer.flush()?;
        self.sent.record(frame.len() as u64, msg.information_bits() as u64);
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Message, TransportError> {
        Ok(read_frame(&mut self.reader)?)
    }
}

impl Channel for TcpLink {
    fn send_message(&mut self, msg: &Message) -> Result<(), TransportError> {
        self.send(msg)
    }

    fn send_frame(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.writer.write_all(frame)?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv_message(&mut self) -> Result<Message, TransportError> {
        self.recv()
    }
}
