// Event-stream consumer. The browser's EventSource reconnects by itself and
// resends Last-Event-ID, so short drops resume from the server's backlog; on
// every reopen after an error we additionally signal a possible gap so the
// dashboard backfills charts from GET /readings. Connection state is
// surfaced for the "reconnecting" banner.

export interface StreamEvent {
  type: "reading" | "alert" | "phase" | "node" | "hatch" | "command" | "advisory";
  event_id: number;
  [key: string]: unknown;
}

export type EventSourceFactory = (url: string) => EventSource;

export interface StreamHandlers {
  onEvent(event: StreamEvent): void;
  onStateChange?(connected: boolean): void;
  onResume?(lastEventId: number | null): void;
}

export class LiveStream {
  lastEventId: number | null = null;
  connected = false;
  private source: EventSource | null = null;
  private hadError = false;

  constructor(
    private url: string,
    private handlers: StreamHandlers,
    private makeSource: EventSourceFactory = (u) => new EventSource(u),
  ) {}

  start(): void {
    this.source = this.makeSource(this.url);
    this.source.onopen = () => {
      const resumed = this.hadError;
      this.hadError = false;
      this.setConnected(true);
      if (resumed) {
        this.handlers.onResume?.(this.lastEventId);
      }
    };
    this.source.onerror = () => {
      this.hadError = true;
      this.setConnected(false);
      // EventSource retries on its own, carrying Last-Event-ID
    };
    this.source.onmessage = (msg: MessageEvent) => {
      let event: StreamEvent;
      try {
        event = JSON.parse(msg.data as string) as StreamEvent;
      } catch {
        return; // keepalives and junk are not events
      }
      if (typeof event.event_id === "number") {
        this.lastEventId = event.event_id;
      }
      this.handlers.onEvent(event);
    };
  }

  stop(): void {
    this.source?.close();
    this.source = null;
    this.setConnected(false);
  }

  private setConnected(connected: boolean): void {
    if (connected !== this.connected) {
      this.connected = connected;
      this.handlers.onStateChange?.(connected);
    }
  }
}
